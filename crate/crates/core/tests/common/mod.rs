#![allow(dead_code)]

use std::rc::Rc;

use gassip::graphio::{gcn_norm, SparseGraph, Splits};
use gassip::numerics::gradcheck::{check_gradients, GradCheckReport};
use gassip::numerics::rng::rng_from_seed;
use gassip::numerics::{Matrix, Tape, Var};
use gassip::operators::{op_forward, op_forward_tape, GraphContext, OpKind, OpVars, OpWeights};
use gassip::sparsifier::{
    assign_pseudo_labels, node_weights, struct_loss, CurriculumState, StructureGradients, StructureMask,
    SupernetGradients,
};
use gassip::supernet::{
    supernet_forward_tape, top_k_from_probs, Architecture, ForwardOptions, Supernet, SupernetConfig, Trainable,
};
use gassip::operators::MaskMode;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-5;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Erdos-Renyi graph with canonical edges, random features, labels and a
/// split covering every node.
pub fn random_graph(n: usize, p: f64, d: usize, classes: usize, rng: &mut ChaCha8Rng) -> SparseGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for i in 0..n {
        match i % 3 {
            0 => train.push(i),
            1 => val.push(i),
            _ => test.push(i),
        }
    }
    SparseGraph {
        name: "random".into(),
        num_nodes: n,
        num_classes: classes,
        edges,
        features: random_matrix(n, d, rng),
        labels,
        splits: Splits { train, val, test },
    }
}

/// Gradient check of one operation kind in `x`, the undirected mask, raw
/// weights, weight-mask scores and bias, through `W * sigmoid(S_W)`.
pub fn gradcheck_operator(kind: OpKind, seed: u64) -> GradCheckReport {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(3..8);
    let (din, dout) = (3, 2);
    let mut g = random_graph(n, 0.5, din, 2, &mut rng);
    if g.edges.is_empty() {
        g.edges.push((0, 1));
    }
    let ctx = GraphContext::new(&g, &gcn_norm(&g)).unwrap();
    let shapes = kind.tensor_shapes(din, dout);
    let k = shapes.len();
    let mut inputs = vec![g.features.clone(), Matrix::from_shape_fn((g.num_edges(), 1), |_| rng.random_range(0.2..1.0))];
    for &(r, c) in &shapes {
        inputs.push(random_matrix(r, c, &mut rng));
    }
    for &(r, c) in &shapes {
        inputs.push(random_matrix(r, c, &mut rng).mapv(|v| 2.0 * v));
    }
    inputs.push(random_matrix(1, dout, &mut rng));
    let probe = random_matrix(n, dout, &mut rng);
    check_gradients(&inputs, H, |tape, v| {
        let slot = ctx.expand_mask(tape, v[1]);
        let effective = (0..k)
            .map(|i| {
                let gate = tape.sigmoid(v[2 + k + i]);
                tape.mul(v[2 + i], gate)
            })
            .collect();
        let vars = OpVars { effective, bias: v[2 + 2 * k] };
        let out = op_forward_tape(tape, kind, v[0], &ctx, slot, &vars)?;
        let r = tape.constant(probe.clone());
        let prod = tape.mul(out, r);
        Ok(tape.sum(prod))
    })
    .unwrap()
}

fn small_supernet(din: usize, classes: usize, seed: u64) -> Supernet {
    Supernet::new(&SupernetConfig {
        in_dim: din,
        hidden: 4,
        out_dim: classes,
        layers: 2,
        candidates: OpKind::ALL.to_vec(),
        dropout: 0.0,
        score_init: 1.0,
        seed,
    })
    .unwrap()
}

/// Gradient check of a two-layer mixed supernet in its architecture
/// logits, input features and undirected edge mask.
pub fn gradcheck_mixed(seed: u64) -> GradCheckReport {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(3..8);
    let mut g = random_graph(n, 0.5, 3, 3, &mut rng);
    if g.edges.is_empty() {
        g.edges.push((0, 1));
    }
    let ctx = GraphContext::new(&g, &gcn_norm(&g)).unwrap();
    let net = small_supernet(3, 3, seed);
    let inputs = vec![
        g.features.clone(),
        Matrix::from_shape_fn((g.num_edges(), 1), |_| rng.random_range(0.2..1.0)),
        random_matrix(1, 5, &mut rng),
        random_matrix(1, 5, &mut rng),
    ];
    let probe = random_matrix(n, 3, &mut rng);
    check_gradients(&inputs, H, |tape, v| {
        let mut vars = net.register(tape, &MaskMode::Soft, Trainable::default(), None);
        vars.layers[0].alpha = v[2];
        vars.layers[1].alpha = v[3];
        let slot = ctx.expand_mask(tape, v[1]);
        let (z, _) = supernet_forward_tape(tape, &net, &vars, &ctx, v[0], slot, ForwardOptions::eval())?;
        let r = tape.constant(probe.clone());
        let prod = tape.mul(z, r);
        Ok(tape.sum(prod))
    })
    .unwrap()
}

/// Gradient check of the structure-mask sigmoid `sigmoid(S_G - gamma)`
/// followed by the mean binary entropy and a linear probe.
pub fn gradcheck_mask(seed: u64) -> GradCheckReport {
    let mut rng = rng_from_seed(seed);
    let e = rng.random_range(1..12);
    let inputs = vec![random_matrix(e, 1, &mut rng).mapv(|v| 3.0 * v), random_matrix(1, 1, &mut rng)];
    let probe = random_matrix(e, 1, &mut rng);
    check_gradients(&inputs, H, |tape, v| {
        let neg = tape.scale(v[1], -1.0);
        let shifted = tape.add_row(v[0], neg);
        let m = tape.sigmoid(shifted);
        let ent = tape.binary_entropy_mean(m);
        let r = tape.constant(probe.clone());
        let prod = tape.mul(m, r);
        let lin = tape.sum(prod);
        Ok(tape.add(ent, lin))
    })
    .unwrap()
}

/// Gradient check of weighted cross-entropy in the logits.
pub fn gradcheck_cross_entropy(seed: u64) -> GradCheckReport {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(2..10);
    let c = rng.random_range(2..5);
    let logits = random_matrix(n, c, &mut rng).mapv(|v| 3.0 * v);
    let targets: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let nodes: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.7).collect();
    let nodes = if nodes.is_empty() { vec![0] } else { nodes };
    let weights: Vec<f64> = nodes.iter().map(|_| rng.random_range(0.0..1.0)).collect();
    let (targets, nodes, weights) = (Rc::new(targets), Rc::new(nodes), Rc::new(weights));
    check_gradients(&[logits], H, |tape, v| {
        tape.cross_entropy(v[0], targets.clone(), nodes.clone(), weights.clone())
    })
    .unwrap()
}

/// Structure-loss fixture: a small random graph, supernet, mask and state
/// with pseudo-labels and node weights populated.
pub struct StructFixture {
    pub graph: SparseGraph,
    pub ctx: GraphContext,
    pub net: Supernet,
    pub mask: StructureMask,
    pub state: CurriculumState,
    pub arch: Architecture,
    pub beta: f64,
}

pub fn struct_fixture(seed: u64) -> StructFixture {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(4..9);
    let mut graph = random_graph(n, 0.5, 3, 3, &mut rng);
    if graph.edges.is_empty() {
        graph.edges.push((0, 1));
    }
    let ctx = GraphContext::new(&graph, &gcn_norm(&graph)).unwrap();
    let net = small_supernet(3, 3, seed);
    let mut mask = StructureMask::new(graph.num_edges(), 0.0, 0.0);
    mask.scores.value = random_matrix(graph.num_edges(), 1, &mut rng).mapv(|v| 2.0 * v);
    mask.gamma.value[[0, 0]] = rng.random_range(-0.5..0.5);
    let logits = random_matrix(n, 3, &mut rng);
    let mut state = CurriculumState::new(graph.num_edges());
    state.pseudo_labels = assign_pseudo_labels(&logits, &graph.labels, &graph.splits);
    state.loss_nodes = (0..n).collect();
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    state.node_weights = node_weights(&d).unwrap();
    let arch = Architecture(vec![rng.random_range(0..5), rng.random_range(0..5)]);
    StructFixture {
        graph,
        ctx,
        net,
        mask,
        state,
        arch,
        beta: 0.5,
    }
}

/// Structure-loss gradients in `S_G` and `gamma` against central
/// differences of the loss value.
pub fn gradcheck_struct_loss(seed: u64) -> f64 {
    let f = struct_fixture(seed);
    let mut source = SupernetGradients {
        net: &f.net,
        ctx: &f.ctx,
        features: &f.graph.features,
        beta: f.beta,
    };
    let (gs, gg) = source.gradients(&f.arch, &f.mask, &f.state).unwrap();
    let loss = |m: &StructureMask| struct_loss(&f.net, &f.arch, &f.ctx, &f.graph.features, m, &f.state, f.beta).unwrap();
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
    let mut worst = 0.0f64;
    for e in 0..f.mask.num_edges() {
        let mut m = f.mask.clone();
        m.scores.value[[e, 0]] += H;
        let plus = loss(&m);
        m.scores.value[[e, 0]] -= 2.0 * H;
        let minus = loss(&m);
        worst = worst.max(rel(gs[e], (plus - minus) / (2.0 * H)));
    }
    let mut m = f.mask.clone();
    m.gamma.value[[0, 0]] += H;
    let plus = loss(&m);
    m.gamma.value[[0, 0]] -= 2.0 * H;
    let minus = loss(&m);
    worst.max(rel(gg, (plus - minus) / (2.0 * H)))
}

/// Largest deviation between zeroing one edge's mask and deleting the edge,
/// over `graphs` random graphs and every operation kind. Both sides use the
/// original graph's normalisation coefficients.
pub fn edge_deletion_max_diff(graphs: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < graphs {
        let n = rng.random_range(2..=30);
        let p = rng.random_range(0.05..0.5);
        let g = random_graph(n, p, 4, 3, &mut rng);
        if g.edges.is_empty() {
            continue;
        }
        done += 1;
        let norm = gcn_norm(&g);
        let target = rng.random_range(0..g.num_edges());
        let mut mask = vec![1.0; 2 * g.num_edges()];
        mask[2 * target] = 0.0;
        mask[2 * target + 1] = 0.0;
        let keep: Vec<bool> = (0..g.num_edges()).map(|e| e != target).collect();
        let deleted = g.with_edges_retained(&keep);
        for kind in OpKind::ALL {
            let w = OpWeights::init(kind, 4, 3, rng.random_range(-2.0..2.0), &mut rng);
            let masked = op_forward(kind, &g.features, &g, &norm, &mask, &w).unwrap();
            let removed = op_forward(kind, &g.features, &deleted, &norm, &vec![1.0; 2 * deleted.num_edges()], &w).unwrap();
            let diff = (&masked - &removed).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            worst = worst.max(diff);
        }
    }
    worst
}

/// Exhaustive reference ranking: every architecture, product of per-layer
/// probabilities left to right, sorted by probability then op indices.
pub fn brute_force_top_k(probs: &[Vec<f64>], k: usize) -> Vec<(Architecture, f64)> {
    let mut all: Vec<(Vec<usize>, f64)> = vec![(vec![], 1.0)];
    for layer in probs {
        all = all
            .into_iter()
            .flat_map(|(ops, p)| {
                layer.iter().enumerate().map(move |(o, &q)| {
                    let mut ops = ops.clone();
                    ops.push(o);
                    (ops, p * q)
                })
            })
            .collect();
    }
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all.into_iter().map(|(o, p)| (Architecture(o), p)).collect()
}

/// Compares `top_k_from_probs` with the exhaustive ranking on every shape
/// up to 3 layers x 5 ops and every `k`, with random, uniform and
/// quantised (tie-heavy) probabilities. Returns (cases, mismatches).
pub fn top_k_oracle(seed: u64) -> (usize, usize) {
    let mut rng = rng_from_seed(seed);
    let (mut cases, mut bad) = (0, 0);
    for layers in 1..=3 {
        for ops in 1..=5usize {
            for variant in 0..4 {
                let probs: Vec<Vec<f64>> = (0..layers)
                    .map(|_| {
                        let logits: Vec<f64> = (0..ops)
                            .map(|_| match variant {
                                0 => rng.random_range(-2.0..2.0),
                                1 => 0.0,
                                _ => rng.random_range(0..3) as f64 * 0.5,
                            })
                            .collect();
                        gassip::numerics::softmax_vec(&logits)
                    })
                    .collect();
                let space = ops.pow(layers as u32);
                for k in 1..=space {
                    cases += 1;
                    if top_k_from_probs(&probs, k).unwrap() != brute_force_top_k(&probs, k) {
                        bad += 1;
                    }
                }
            }
        }
    }
    (cases, bad)
}

/// Scalar sum of `out * probe` on a fresh tape; used by equivariance tests.
pub fn probe_sum(tape: &mut Tape, out: Var, probe: &Matrix) -> Var {
    let r = tape.constant(probe.clone());
    let prod = tape.mul(out, r);
    tape.sum(prod)
}

/// Replays fixed per-architecture gradients in call order.
pub struct Scripted {
    pub grads: Vec<(Vec<f64>, f64)>,
    pub calls: Vec<Architecture>,
}

impl StructureGradients for Scripted {
    fn gradients(
        &mut self,
        arch: &Architecture,
        _: &StructureMask,
        _: &CurriculumState,
    ) -> gassip::Result<(Vec<f64>, f64)> {
        let g = self.grads[self.calls.len() % self.grads.len()].clone();
        self.calls.push(arch.clone());
        Ok(g)
    }
}

/// Largest deviation of one scripted curriculum step on a 3-edge path from
/// the hand-computed scores, threshold and stored std (smoothing 1).
pub fn curriculum_arithmetic_error() -> f64 {
    use gassip::sparsifier::{curriculum_step, CurriculumParams};
    let g = SparseGraph {
        name: "path".into(),
        num_nodes: 4,
        num_classes: 2,
        edges: vec![(0, 1), (1, 2), (2, 3)],
        features: Matrix::from_shape_vec((4, 2), vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.5, 0.0]).unwrap(),
        labels: vec![0, 1, 1, 0],
        splits: Splits {
            train: vec![0, 1],
            val: vec![2],
            test: vec![3],
        },
    };
    let mut net = small_supernet(2, 2, 1);
    net.layers[0].alpha.value = Matrix::from_shape_vec((1, 5), vec![0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
    net.layers[1].alpha.value = Matrix::from_shape_vec((1, 5), vec![3.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let mut mask = StructureMask::new(3, 3.0, 0.0);
    let mut state = CurriculumState::new(3);
    state.set_cache(Matrix::zeros((4, 2)), Matrix::ones((4, 2)));
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
    curriculum_step(&g, &net, &mut mask, &mut state, &params, &mut src).unwrap();
    let want_scores = [2.9, 3.2, 3.0];
    let want_std = [1.0, 0.0, 0.5];
    let mut worst = (mask.gamma() + 0.01).abs();
    for e in 0..3 {
        worst = worst.max((mask.scores.value[[e, 0]] - want_scores[e]).abs());
        worst = worst.max((state.d_arch[e] - want_std[e]).abs());
    }
    worst
}
