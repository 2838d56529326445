//! Lightweight graph neural architecture search with curriculum graph
//! sparsification and learnable weight pruning.

pub mod cli;
pub mod engine;
pub mod error;
pub mod graphio;
pub mod numerics;
pub mod operators;
pub mod sparsifier;
pub mod supernet;

pub use error::{Error, GraphError, Result};
