use super::context::GraphContext;
use super::kind::OpKind;
use super::weights::{register_op, MaskMode, OpVars, OpWeights};
use crate::error::{Error, Result};
use crate::graphio::{NormCoefficients, SparseGraph};
use crate::numerics::{Matrix, Tape, Var};

pub const GAT_NEGATIVE_SLOPE: f64 = 0.2;

/// Records one operation on the tape.
///
/// `slot_mask` is the `num_slots x 1` edge mask column of `ctx` (self-loop
/// slots are expected to hold 1).
pub fn op_forward_tape(
    tape: &mut Tape,
    kind: OpKind,
    x: Var,
    ctx: &GraphContext,
    slot_mask: Var,
    vars: &OpVars,
) -> Result<Var> {
    let din = tape.value(x).ncols();
    let expected = kind.tensor_shapes(din, tape.value(vars.bias).ncols());
    for (v, shape) in vars.effective.iter().zip(&expected) {
        if tape.value(*v).dim() != *shape {
            return Err(Error::Dimension(format!(
                "{kind}: weight of shape {:?} for input width {din}, expected {shape:?}",
                tape.value(*v).dim()
            )));
        }
    }
    if kind.reads_graph() {
        if tape.value(x).nrows() != ctx.num_nodes {
            return Err(Error::Dimension(format!(
                "{} feature rows for a {}-node graph",
                tape.value(x).nrows(),
                ctx.num_nodes
            )));
        }
        if tape.value(slot_mask).dim() != (ctx.num_slots(), 1) {
            return Err(Error::Dimension(format!(
                "edge mask of shape {:?}, expected ({}, 1)",
                tape.value(slot_mask).dim(),
                ctx.num_slots()
            )));
        }
    }

    let w = &vars.effective;
    let out = match kind {
        OpKind::Linear => tape.matmul(x, w[0]),
        OpKind::Gcn => {
            let h = tape.matmul(x, w[0]);
            let adj = masked_norm(tape, ctx, slot_mask);
            tape.spmm(ctx.edges.clone(), adj, h)
        }
        OpKind::Sage => {
            let own = tape.matmul(x, w[0]);
            let h = tape.matmul(x, w[1]);
            let non_self = tape.constant(ctx.non_self().clone());
            let weights = tape.mul(slot_mask, non_self);
            let summed = tape.spmm(ctx.edges.clone(), weights, h);
            let ones = tape.constant(Matrix::ones((ctx.num_nodes, 1)));
            let mass = tape.spmm(ctx.edges.clone(), weights, ones);
            let mean = tape.row_div(summed, mass);
            tape.add(own, mean)
        }
        OpKind::Gat => {
            let h = tape.matmul(x, w[0]);
            // e_ij = a_src . h_i + a_dst . h_j, with i the receiving node
            let own_score = tape.matmul(h, w[1]);
            let nbr_score = tape.matmul(h, w[2]);
            let own = tape.gather(own_score, ctx.dst_index.clone(), 0.0);
            let nbr = tape.gather(nbr_score, ctx.src_index.clone(), 0.0);
            let logits = tape.add(own, nbr);
            let logits = tape.leaky_relu(logits, GAT_NEGATIVE_SLOPE);
            let attn = tape.edge_softmax(logits, slot_mask, ctx.dst.clone(), ctx.num_nodes);
            tape.spmm(ctx.edges.clone(), attn, h)
        }
        OpKind::Arma => {
            let adj = masked_norm(tape, ctx, slot_mask);
            let h0 = tape.matmul(x, w[0]);
            let h0 = tape.spmm(ctx.edges.clone(), adj, h0);
            let h = tape.relu(h0);
            let rec = tape.matmul(h, w[1]);
            let rec = tape.spmm(ctx.edges.clone(), adj, rec);
            let skip = tape.matmul(x, w[2]);
            tape.add(rec, skip)
        }
    };
    Ok(tape.add_row(out, vars.bias))
}

fn masked_norm(tape: &mut Tape, ctx: &GraphContext, slot_mask: Var) -> Var {
    let coef = tape.constant(ctx.coefficients().clone());
    tape.mul(coef, slot_mask)
}

/// Evaluates one operation on plain matrices.
///
/// `edge_mask` holds one weight per directed edge (`2E` values in the
/// slot order of [`GraphContext`]); self-loops are fixed at 1.
pub fn op_forward(
    kind: OpKind,
    x: &Matrix,
    graph: &SparseGraph,
    norm: &NormCoefficients,
    edge_mask: &[f64],
    weights: &OpWeights,
) -> Result<Matrix> {
    if weights.kind != kind {
        return Err(Error::InvalidArgument(format!("{} weights used for {kind}", weights.kind)));
    }
    if x.ncols() != weights.din {
        return Err(Error::Dimension(format!("input width {} for {kind} expecting {}", x.ncols(), weights.din)));
    }
    let ctx = GraphContext::new(graph, norm)?;
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let mask = tape.constant(ctx.slot_mask_from_directed(edge_mask)?);
    let (vars, _) = register_op(&mut tape, weights, &MaskMode::Soft, false);
    let out = op_forward_tape(&mut tape, kind, xv, &ctx, mask, &vars)?;
    Ok(tape.value(out).clone())
}
