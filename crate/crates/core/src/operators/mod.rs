//! Candidate message-passing operations over a masked graph.

mod context;
mod forward;
mod kind;
mod weights;

pub use context::GraphContext;
pub use forward::{op_forward, op_forward_tape, GAT_NEGATIVE_SLOPE};
pub use kind::{count_params, OpKind};
pub use weights::{register_op, MaskMode, OpLeaves, OpVars, OpWeights};
