//! Runs every candidate operation on a small graph, with the full graph and
//! with one edge masked out.

use gassip::graphio::{gcn_norm, SparseGraph, Splits};
use gassip::numerics::rng::rng_from_seed;
use gassip::numerics::Matrix;
use gassip::operators::{count_params, op_forward, OpKind, OpWeights};

fn main() -> gassip::Result<()> {
    let graph = SparseGraph {
        name: "square".into(),
        num_nodes: 4,
        num_classes: 2,
        edges: vec![(0, 1), (0, 3), (1, 2), (2, 3)],
        features: Matrix::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64 / 10.0),
        labels: vec![0, 0, 1, 1],
        splits: Splits::default(),
    };
    let norm = gcn_norm(&graph);
    let full = vec![1.0; 2 * graph.num_edges()];
    let mut cut = full.clone();
    cut[0] = 0.0;
    cut[1] = 0.0;
    let mut rng = rng_from_seed(7);
    for kind in OpKind::ALL {
        let w = OpWeights::init(kind, 3, 2, 3.0, &mut rng);
        let a = op_forward(kind, &graph.features, &graph, &norm, &full, &w)?;
        let b = op_forward(kind, &graph.features, &graph, &norm, &cut, &w)?;
        println!(
            "{kind:>6}: {} params, node 0 full {:?}, without edge 0-1 {:?}",
            count_params(kind, 3, 2, None),
            a.row(0).to_vec(),
            b.row(0).to_vec()
        );
    }
    Ok(())
}
