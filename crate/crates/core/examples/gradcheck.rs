//! Checks tape gradients of a masked GCN layer against central finite
//! differences.

use gassip::graphio::{gcn_norm, SparseGraph, Splits};
use gassip::numerics::gradcheck::check_gradients;
use gassip::numerics::rng::rng_from_seed;
use gassip::numerics::{glorot_uniform, Matrix};
use gassip::operators::{op_forward_tape, GraphContext, OpKind, OpVars};

fn main() -> gassip::Result<()> {
    let mut rng = rng_from_seed(3);
    let graph = SparseGraph {
        name: "path".into(),
        num_nodes: 5,
        num_classes: 2,
        edges: vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)],
        features: glorot_uniform(5, 3, &mut rng),
        labels: vec![0; 5],
        splits: Splits::default(),
    };
    let ctx = GraphContext::new(&graph, &gcn_norm(&graph))?;
    let inputs = vec![
        graph.features.clone(),
        Matrix::from_elem((graph.num_edges(), 1), 0.7),
        glorot_uniform(3, 2, &mut rng),
        Matrix::zeros((1, 2)),
    ];
    let report = check_gradients(&inputs, 1e-5, |tape, v| {
        let mask = tape.sigmoid(v[1]);
        let slots = ctx.expand_mask(tape, mask);
        let vars = OpVars {
            effective: vec![v[2]],
            bias: v[3],
        };
        let out = op_forward_tape(tape, OpKind::Gcn, v[0], &ctx, slots, &vars)?;
        let sq = tape.mul(out, out);
        Ok(tape.sum(sq))
    })?;
    println!(
        "{} entries checked, max relative error {:.2e}, passes 1e-5: {}",
        report.checked,
        report.max_rel_error,
        report.passes(1e-5)
    );
    Ok(())
}
