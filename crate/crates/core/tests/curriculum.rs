mod common;

use gassip::graphio::{gcn_norm, SparseGraph, Splits};
use gassip::numerics::Matrix;
use gassip::operators::{GraphContext, OpKind};
use gassip::sparsifier::{
    curriculum_step, CurriculumParams, CurriculumState, StructureGradients, StructureMask, SupernetGradients,
};
use gassip::supernet::{Architecture, Supernet, SupernetConfig};
use gassip::Result;
use ndarray::array;

/// Returns scripted gradients in call order and records the architectures asked for.
struct Scripted {
    grads: Vec<(Vec<f64>, f64)>,
    calls: Vec<Architecture>,
}

impl StructureGradients for Scripted {
    fn gradients(&mut self, arch: &Architecture, _: &StructureMask, _: &CurriculumState) -> Result<(Vec<f64>, f64)> {
        let g = self.grads[self.calls.len() % self.grads.len()].clone();
        self.calls.push(arch.clone());
        Ok(g)
    }
}

fn path4() -> SparseGraph {
    SparseGraph {
        name: "path".into(),
        num_nodes: 4,
        num_classes: 2,
        edges: vec![(0, 1), (1, 2), (2, 3)],
        features: array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.0]],
        labels: vec![0, 1, 1, 0],
        splits: Splits {
            train: vec![0, 1],
            val: vec![2],
            test: vec![3],
        },
    }
}

fn net(seed: u64) -> Supernet {
    let mut net = Supernet::new(&SupernetConfig {
        in_dim: 2,
        hidden: 3,
        out_dim: 2,
        layers: 2,
        candidates: vec![OpKind::Gcn, OpKind::Sage],
        dropout: 0.0,
        score_init: 3.0,
        seed,
    })
    .unwrap();
    net.layers[0].alpha.value = array![[0.0, 1.0]];
    net.layers[1].alpha.value = array![[2.0, 0.0]];
    net
}

fn state() -> CurriculumState {
    let mut s = CurriculumState::new(3);
    // node 2 predicted as class 0, node 3 as class 0
    s.set_cache(
        array![[0.0, 1.0], [0.0, 1.0], [2.0, 0.0], [1.0, 0.0]],
        array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0]],
    );
    s
}

#[test]
fn scripted_update_matches_hand_computation() {
    let g = path4();
    let net = net(1);
    let mut mask = StructureMask::new(3, 3.0, 0.0);
    let mut st = state();
    let params = CurriculumParams {
        k: 2,
        lr: 0.1,
        smoothing: 1.0,
        ..Default::default()
    };
    let mut src = Scripted {
        grads: vec![(vec![1.0, -2.0, 0.5], 0.3), (vec![3.0, -2.0, -0.5], -0.1)],
        calls: vec![],
    };
    let report = curriculum_step(&g, &net, &mut mask, &mut st, &params, &mut src).unwrap();

    // layer probs softmax(0,1) and softmax(2,0); the best two
    // architectures are [1,0] then [0,0]
    assert_eq!(src.calls, vec![Architecture(vec![1, 0]), Architecture(vec![0, 0])]);
    assert_eq!(report.architectures.len(), 2);

    // edge 0: sum 4, std 1 -> 0.1 * 4 / (2 * 2) = 0.1
    // edge 1: sum -4, std 0 -> 0.1 * -4 / (2 * 1) = -0.2
    // edge 2: sum 0, std 0.5 -> 0
    let expected = [3.0 - 0.1, 3.0 + 0.2, 3.0];
    for (e, want) in expected.iter().enumerate() {
        assert!((mask.scores.value[[e, 0]] - want).abs() < 1e-12, "edge {e}");
    }
    // gamma: 0 - 0.1 * (0.3 - 0.1) / 2
    assert!((mask.gamma() + 0.01).abs() < 1e-12);
    assert_eq!(st.d_arch, vec![1.0, 0.0, 0.5]);

    // pseudo-labels keep ground truth on training nodes
    assert_eq!(st.pseudo_labels, vec![0, 1, 0, 0]);
    // node view: cos(h0,h1)=0, cos(h1,h2)=0, cos(h2,h3)=1;
    // divergence of the lower endpoint: node 0 {1} -> 1, node 1 {0,2} -> 2/2, node 2 {1,3} -> 1/2
    let d_node = [1.0, 1.0, 1.5];
    for (a, b) in st.d_node.iter().zip(d_node) {
        assert!((a - b).abs() < 1e-12);
    }
    // first step: D_arch was zero, so D == D_node; node difficulty is the incident mean
    let node_d = [1.0, 1.0, 1.25, 1.5];
    for (a, b) in st.node_difficulty.iter().zip(node_d) {
        assert!((a - b).abs() < 1e-12);
    }
    let z: f64 = node_d.iter().map(|d| d.exp()).sum();
    for (w, d) in st.node_weights.iter().zip(node_d) {
        assert!((w - d.exp() / z).abs() < 1e-12);
    }
    assert!((st.node_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    // second step folds the stored std into the edge difficulty
    let mut src2 = Scripted {
        grads: vec![(vec![0.0; 3], 0.0)],
        calls: vec![],
    };
    let before = mask.clone();
    curriculum_step(&g, &net, &mut mask, &mut st, &params, &mut src2).unwrap();
    let combined = [1.0 + 1.0, 0.0 + 1.0, 0.5 + 1.5];
    for (a, b) in st.d_combined.iter().zip(combined) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(mask, before);
    assert_eq!(st.d_arch, vec![0.0; 3]);
}

#[test]
fn identical_gradients_and_single_architecture() {
    let g = path4();
    let net = net(2);
    for k in [1, 2] {
        let mut mask = StructureMask::new(3, 3.0, 0.5);
        let mut st = state();
        let params = CurriculumParams {
            k,
            lr: 0.5,
            smoothing: 1.0,
            ..Default::default()
        };
        let mut src = Scripted {
            grads: vec![(vec![0.2, -0.4, 1.0], 0.6)],
            calls: vec![],
        };
        curriculum_step(&g, &net, &mut mask, &mut st, &params, &mut src).unwrap();
        let expected = [3.0 - 0.1, 3.0 + 0.2, 3.0 - 0.5];
        for (e, want) in expected.iter().enumerate() {
            assert!((mask.scores.value[[e, 0]] - want).abs() < 1e-12);
        }
        assert!((mask.gamma() - (0.5 - 0.3)).abs() < 1e-12);
        assert_eq!(st.d_arch, vec![0.0; 3]);
    }
}

#[test]
fn too_many_architectures() {
    let g = path4();
    let net = net(0);
    let mut mask = StructureMask::new(3, 3.0, 0.0);
    let mut st = state();
    let params = CurriculumParams { k: 5, ..Default::default() };
    let mut src = Scripted { grads: vec![(vec![0.0; 3], 0.0)], calls: vec![] };
    assert!(curriculum_step(&g, &net, &mut mask, &mut st, &params, &mut src).is_err());
}

#[test]
fn missing_cache_is_an_error() {
    let g = path4();
    let net = net(0);
    let mut mask = StructureMask::new(3, 3.0, 0.0);
    let mut st = CurriculumState::new(3);
    let mut src = Scripted { grads: vec![(vec![0.0; 3], 0.0)], calls: vec![] };
    assert!(curriculum_step(&g, &net, &mut mask, &mut st, &CurriculumParams::default(), &mut src).is_err());
}

#[test]
fn real_step_leaves_network_untouched() {
    let g = path4();
    let net = net(4);
    let snapshot = net.clone();
    let ctx = GraphContext::new(&g, &gcn_norm(&g)).unwrap();
    let mut mask = StructureMask::new(3, 3.0, 0.0);
    let mut st = state();
    let mut src = SupernetGradients {
        net: &net,
        ctx: &ctx,
        features: &g.features,
        beta: 0.001,
    };
    curriculum_step(&g, &net, &mut mask, &mut st, &CurriculumParams::default(), &mut src).unwrap();
    assert_eq!(net, snapshot);
    assert_ne!(mask.scores.value, Matrix::from_elem((3, 1), 3.0));
}
