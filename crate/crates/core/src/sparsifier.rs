//! Curriculum graph sparsification.
//!
//! A learnable score per undirected edge and a learnable threshold produce
//! the structure mask `sigmoid(S_G - gamma)`. Each curriculum step assigns
//! pseudo-labels, scores edge-removing difficulty from the node view
//! (endpoint similarity, neighbourhood label divergence) and the
//! architecture view (disagreement of structure gradients across the top-K
//! architectures), reweights nodes by difficulty, and applies a
//! confidence-scaled update to the scores.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphio::{SparseGraph, Splits};
use crate::numerics::{argmax, binary_entropy, sigmoid, softmax_vec, Matrix, Param, Tape, Var};
use crate::operators::{GraphContext, MaskMode};
use crate::supernet::{discrete_forward_tape, top_k_architectures, Architecture, ForwardOptions, Supernet, Trainable};

#[derive(Clone, Debug, PartialEq)]
pub struct StructureMask {
    /// `E x 1` edge scores aligned with the canonical edge list.
    pub scores: Param,
    /// `1 x 1` threshold.
    pub gamma: Param,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskCheckpoint {
    pub gamma: f64,
    pub s_g: Vec<f64>,
}

impl StructureMask {
    pub fn new(num_edges: usize, score_init: f64, gamma_init: f64) -> Self {
        Self {
            scores: Param::new("structure.scores", Matrix::from_elem((num_edges, 1), score_init)),
            gamma: Param::new("structure.gamma", Matrix::from_elem((1, 1), gamma_init)),
        }
    }

    pub fn num_edges(&self) -> usize {
        self.scores.value.nrows()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.value[[0, 0]]
    }

    pub fn score_values(&self) -> Vec<f64> {
        self.scores.value.column(0).to_vec()
    }

    /// `sigmoid(S_G[e] - gamma)` per edge.
    pub fn mask_values(&self) -> Vec<f64> {
        let g = self.gamma();
        self.scores.value.column(0).iter().map(|&s| sigmoid(s - g)).collect()
    }

    /// Keeps edge `e` iff `S_G[e] >= gamma`, i.e. iff its mask value is at least 0.5.
    pub fn binarize(&self) -> Vec<bool> {
        let g = self.gamma();
        self.scores.value.column(0).iter().map(|&s| s >= g).collect()
    }

    /// Records the mask on the tape; returns the `E x 1` mask column and,
    /// when trainable, the score and threshold leaves.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> (Var, Option<(Var, Var)>) {
        if !trainable {
            let m = Matrix::from_shape_vec((self.num_edges(), 1), self.mask_values()).unwrap();
            return (tape.constant(m), None);
        }
        let s = tape.param(self.scores.value.clone());
        let g = tape.param(self.gamma.value.clone());
        let neg = tape.scale(g, -1.0);
        let shifted = tape.add_row(s, neg);
        (tape.sigmoid(shifted), Some((s, g)))
    }

    pub fn checkpoint(&self) -> MaskCheckpoint {
        MaskCheckpoint {
            gamma: self.gamma(),
            s_g: self.score_values(),
        }
    }

    pub fn from_checkpoint(ck: &MaskCheckpoint) -> Self {
        let mut m = Self::new(ck.s_g.len(), 0.0, ck.gamma);
        m.scores.value = Matrix::from_shape_vec((ck.s_g.len(), 1), ck.s_g.clone()).unwrap();
        m
    }
}

/// Binarises a structure mask (see [`StructureMask::binarize`]).
pub fn binarize_structure(mask: &StructureMask) -> Vec<bool> {
    mask.binarize()
}

/// Which nodes the structure loss sums over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossNodeSet {
    /// Training nodes only.
    Labeled,
    /// Every node, unlabeled ones scored against pseudo-labels.
    #[default]
    All,
}

impl LossNodeSet {
    pub fn nodes(self, num_nodes: usize, splits: &Splits) -> Vec<usize> {
        match self {
            LossNodeSet::Labeled => splits.train.clone(),
            LossNodeSet::All => (0..num_nodes).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumParams {
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta: f64,
    /// Added to the per-edge gradient std in the confidence denominator.
    pub smoothing: f64,
    pub lr: f64,
    pub loss_nodes: LossNodeSet,
    /// Average the label-divergence term over both endpoints instead of
    /// using the lower-indexed one.
    pub symmetric_node_view: bool,
}

impl Default for CurriculumParams {
    fn default() -> Self {
        Self {
            k: 2,
            lambda1: 1.0,
            lambda2: 1.0,
            beta: 0.001,
            smoothing: 1e-4,
            lr: 0.1,
            loss_nodes: LossNodeSet::All,
            symmetric_node_view: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurriculumState {
    pub pseudo_labels: Vec<usize>,
    /// Logits of the latest mixed forward.
    pub logits: Option<Matrix>,
    /// Representation fed to the last layer in that forward.
    pub hidden: Option<Matrix>,
    /// Per-edge gradient std from the previous step (zero before the first).
    pub d_arch: Vec<f64>,
    pub d_node: Vec<f64>,
    pub d_combined: Vec<f64>,
    pub node_difficulty: Vec<f64>,
    pub loss_nodes: Vec<usize>,
    /// Aligned with `loss_nodes`.
    pub node_weights: Vec<f64>,
}

impl CurriculumState {
    pub fn new(num_edges: usize) -> Self {
        Self {
            d_arch: vec![0.0; num_edges],
            ..Default::default()
        }
    }

    pub fn set_cache(&mut self, logits: Matrix, hidden: Matrix) {
        self.logits = Some(logits);
        self.hidden = Some(hidden);
    }
}

/// Ground truth on training nodes, argmax prediction elsewhere.
pub fn assign_pseudo_labels(logits: &Matrix, labels: &[usize], splits: &Splits) -> Vec<usize> {
    let mut pseudo: Vec<usize> = logits.rows().into_iter().map(|r| argmax(r.iter().copied())).collect();
    for &i in &splits.train {
        pseudo[i] = labels[i];
    }
    pseudo
}

fn cosine(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        a.dot(&b) / (na * nb)
    }
}

/// Fraction of each node's neighbours whose pseudo-label differs from its own.
pub fn label_divergence(graph: &SparseGraph, pseudo: &[usize]) -> Vec<f64> {
    graph
        .neighbors()
        .iter()
        .enumerate()
        .map(|(i, nbrs)| {
            if nbrs.is_empty() {
                0.0
            } else {
                nbrs.iter().filter(|&&j| pseudo[j] != pseudo[i]).count() as f64 / nbrs.len() as f64
            }
        })
        .collect()
}

/// `cos(z_u, z_v) + lambda1 * divergence(u)` per edge `(u, v)`, `u < v`.
pub fn node_view_difficulty(
    hidden: &Matrix,
    pseudo: &[usize],
    graph: &SparseGraph,
    lambda1: f64,
    symmetric: bool,
) -> Vec<f64> {
    let div = label_divergence(graph, pseudo);
    graph
        .edges
        .iter()
        .map(|&(u, v)| {
            let d = if symmetric { 0.5 * (div[u] + div[v]) } else { div[u] };
            cosine(hidden.row(u), hidden.row(v)) + lambda1 * d
        })
        .collect()
}

/// Edge difficulty `D_arch + lambda2 * D_node` and node difficulty as the
/// mean over incident edges (0 for isolated nodes).
pub fn combine_difficulty(d_arch: &[f64], d_node: &[f64], lambda2: f64, graph: &SparseGraph) -> (Vec<f64>, Vec<f64>) {
    let edge: Vec<f64> = d_arch.iter().zip(d_node).map(|(a, n)| a + lambda2 * n).collect();
    let node = graph
        .incident_edges()
        .iter()
        .map(|inc| {
            if inc.is_empty() {
                0.0
            } else {
                inc.iter().map(|&e| edge[e]).sum::<f64>() / inc.len() as f64
            }
        })
        .collect();
    (edge, node)
}

/// Softmax over the difficulties of the loss node set.
pub fn node_weights(difficulty: &[f64]) -> Result<Vec<f64>> {
    if difficulty.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    Ok(softmax_vec(difficulty))
}

/// Records the structure loss of one architecture:
/// `sum_i theta_i CE(f_arch(A * M_G)[i], pseudo_i) + beta * mean_entropy(M_G)`.
///
/// Only the mask parameters are trainable; the supernet enters with its
/// current effective weights `W * sigmoid(S_W)` as constants.
pub fn struct_loss_tape(
    tape: &mut Tape,
    net: &Supernet,
    arch: &Architecture,
    ctx: &GraphContext,
    features: &Matrix,
    mask: &StructureMask,
    state: &CurriculumState,
    beta: f64,
) -> Result<(Var, Option<(Var, Var)>)> {
    if state.pseudo_labels.len() != ctx.num_nodes {
        return Err(Error::InvalidArgument("pseudo-labels not assigned".into()));
    }
    let (m, leaves) = mask.register(tape, true);
    let slot_mask = ctx.expand_mask(tape, m);
    let x = tape.constant(features.clone());
    let vars = net.register(tape, &MaskMode::Soft, Trainable::default(), Some(arch));
    let (z, _) = discrete_forward_tape(tape, net, &vars, arch, ctx, x, slot_mask, ForwardOptions::eval())?;
    let ce = tape.cross_entropy(
        z,
        Rc::new(state.pseudo_labels.clone()),
        Rc::new(state.loss_nodes.clone()),
        Rc::new(state.node_weights.clone()),
    )?;
    let ent = tape.binary_entropy_mean(m);
    let ent = tape.scale(ent, beta);
    Ok((tape.add(ce, ent), leaves))
}

/// Value of the structure loss.
pub fn struct_loss(
    net: &Supernet,
    arch: &Architecture,
    ctx: &GraphContext,
    features: &Matrix,
    mask: &StructureMask,
    state: &CurriculumState,
    beta: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let (loss, _) = struct_loss_tape(&mut tape, net, arch, ctx, features, mask, state, beta)?;
    Ok(tape.scalar(loss))
}

/// Mean binary entropy of the mask values.
pub fn mask_entropy(mask_values: &[f64]) -> f64 {
    if mask_values.is_empty() {
        return 0.0;
    }
    mask_values.iter().map(|&m| binary_entropy(m)).sum::<f64>() / mask_values.len() as f64
}

/// Source of per-architecture structure gradients `(dL/dS_G, dL/dgamma)`.
pub trait StructureGradients {
    fn gradients(&mut self, arch: &Architecture, mask: &StructureMask, state: &CurriculumState) -> Result<(Vec<f64>, f64)>;
}

/// Differentiates [`struct_loss_tape`] through the supernet.
pub struct SupernetGradients<'a> {
    pub net: &'a Supernet,
    pub ctx: &'a GraphContext,
    pub features: &'a Matrix,
    pub beta: f64,
}

impl StructureGradients for SupernetGradients<'_> {
    fn gradients(&mut self, arch: &Architecture, mask: &StructureMask, state: &CurriculumState) -> Result<(Vec<f64>, f64)> {
        let mut tape = Tape::new();
        let (loss, leaves) = struct_loss_tape(&mut tape, self.net, arch, self.ctx, self.features, mask, state, self.beta)?;
        let loss_value = tape.scalar(loss);
        if !loss_value.is_finite() {
            return Err(Error::NonFinite(format!("structure loss {loss_value}")));
        }
        let (s, g) = leaves.expect("trainable mask");
        let grads = tape.backward(loss)?;
        let gs = grads
            .get(s)
            .map(|m| m.column(0).to_vec())
            .unwrap_or_else(|| vec![0.0; mask.num_edges()]);
        let gg = grads.get(g).map(|m| m[[0, 0]]).unwrap_or(0.0);
        Ok((gs, gg))
    }
}

/// Applies the confidence-weighted update
/// `S_G -= lr * sum(g) / (K * (std(g) + c))`, `gamma -= lr * sum(h) / K`
/// and returns the per-edge population std of the score gradients.
pub fn apply_confidence_update(mask: &mut StructureMask, grads: &[(Vec<f64>, f64)], lr: f64, smoothing: f64) -> Vec<f64> {
    let k = grads.len() as f64;
    let e = mask.num_edges();
    let mut std = vec![0.0; e];
    for (idx, s) in mask.scores.value.column_mut(0).iter_mut().enumerate() {
        let sum: f64 = grads.iter().map(|(g, _)| g[idx]).sum();
        let mean = sum / k;
        let var = grads.iter().map(|(g, _)| (g[idx] - mean).powi(2)).sum::<f64>() / k;
        std[idx] = var.sqrt();
        *s -= lr * sum / (k * (std[idx] + smoothing));
    }
    let gsum: f64 = grads.iter().map(|(_, h)| h).sum();
    mask.gamma.value[[0, 0]] -= lr * gsum / k;
    std
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumStepReport {
    pub architectures: Vec<(Architecture, f64)>,
    pub grad_std: Vec<f64>,
}

/// One curriculum sparsification step: pseudo-labels, difficulties, node
/// weights, top-K structure gradients, confidence-weighted mask update.
/// The supernet is never modified.
pub fn curriculum_step(
    graph: &SparseGraph,
    net: &Supernet,
    mask: &mut StructureMask,
    state: &mut CurriculumState,
    params: &CurriculumParams,
    source: &mut impl StructureGradients,
) -> Result<CurriculumStepReport> {
    let (Some(logits), Some(hidden)) = (&state.logits, &state.hidden) else {
        return Err(Error::InvalidArgument("curriculum step needs cached predictions".into()));
    };
    if mask.num_edges() != graph.num_edges() {
        return Err(Error::Dimension(format!(
            "mask for {} edges on a graph with {}",
            mask.num_edges(),
            graph.num_edges()
        )));
    }
    if state.d_arch.len() != graph.num_edges() {
        state.d_arch = vec![0.0; graph.num_edges()];
    }
    state.pseudo_labels = assign_pseudo_labels(logits, &graph.labels, &graph.splits);
    state.d_node = node_view_difficulty(hidden, &state.pseudo_labels, graph, params.lambda1, params.symmetric_node_view);
    let (d_edge, d_nodes) = combine_difficulty(&state.d_arch, &state.d_node, params.lambda2, graph);
    state.d_combined = d_edge;
    state.loss_nodes = params.loss_nodes.nodes(graph.num_nodes, &graph.splits);
    let selected: Vec<f64> = state.loss_nodes.iter().map(|&i| d_nodes[i]).collect();
    state.node_weights = node_weights(&selected)?;
    state.node_difficulty = d_nodes;

    let architectures = top_k_architectures(net, params.k)?;
    let grads = architectures
        .iter()
        .map(|(a, _)| source.gradients(a, mask, state))
        .collect::<Result<Vec<_>>>()?;
    let grad_std = apply_confidence_update(mask, &grads, params.lr, params.smoothing);
    state.d_arch = grad_std.clone();
    Ok(CurriculumStepReport {
        architectures,
        grad_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn path_graph() -> SparseGraph {
        // star around node 0 plus one extra edge
        SparseGraph {
            name: "t".into(),
            num_nodes: 5,
            num_classes: 2,
            edges: vec![(0, 1), (0, 2), (0, 3), (3, 4)],
            features: Matrix::zeros((5, 2)),
            labels: vec![0, 1, 1, 0, 0],
            splits: Splits {
                train: vec![0, 4],
                val: vec![1],
                test: vec![2, 3],
            },
        }
    }

    #[test]
    fn mask_value_examples() {
        let mut m = StructureMask::new(3, 3.0, 0.0);
        for v in m.mask_values() {
            assert!((v - 0.9525741268224334).abs() < 1e-15);
        }
        m.gamma.value[[0, 0]] = 3.0;
        assert!(m.mask_values().iter().all(|&v| v == 0.5));
        let before = m.mask_values();
        m.gamma.value[[0, 0]] = 3.5;
        assert!(m.mask_values().iter().zip(&before).all(|(a, b)| a < b));
    }

    #[test]
    fn binarize_examples() {
        let mut m = StructureMask::new(2, 0.0, 0.1);
        m.scores.value = array![[-0.2], [0.4]];
        assert_eq!(m.binarize(), vec![false, true]);
        m.gamma.value[[0, 0]] = -1e9;
        assert_eq!(m.binarize(), vec![true, true]);
        m.gamma.value[[0, 0]] = 0.4;
        assert_eq!(m.binarize(), vec![false, true]);
    }

    #[test]
    fn pseudo_labels() {
        let g = path_graph();
        let z = array![[0.0, 5.0], [0.1, 0.9], [0.3, 0.3], [2.0, 0.0], [0.0, 1.0]];
        let p = assign_pseudo_labels(&z, &g.labels, &g.splits);
        assert_eq!(p, vec![0, 1, 0, 0, 0]);
    }

    #[test]
    fn node_view_orthogonal_with_divergence() {
        let g = path_graph();
        // node 0 neighbours 1, 2, 3 with pseudo-labels {1, 1, 0} and own label 0
        let pseudo = vec![0, 1, 1, 0, 0];
        let hidden = array![[1.0, 0.0], [0.0, 1.0], [0.0, 2.0], [1.0, 0.0], [1.0, 0.0]];
        let d = node_view_difficulty(&hidden, &pseudo, &g, 1.0, false);
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-15);
        // (0, 3): identical directions, cos = 1, plus node 0's divergence
        assert!((d[2] - (1.0 + 2.0 / 3.0)).abs() < 1e-15);
        // (3, 4): identical and homophilous
        assert!((d[3] - 1.0).abs() < 1e-15);
        let pure = node_view_difficulty(&hidden, &pseudo, &g, 0.0, false);
        assert_eq!(pure, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_vector_cosine_is_zero() {
        let g = path_graph();
        let hidden = Matrix::zeros((5, 2));
        let d = node_view_difficulty(&hidden, &[0; 5], &g, 0.0, false);
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn combine_examples() {
        let g = path_graph();
        let d_node = vec![1.0, 3.0, 2.0, 4.0];
        let (e, _) = combine_difficulty(&[0.0; 4], &d_node, 1.0, &g);
        assert_eq!(e, d_node);
        let d_arch = vec![0.5, 0.25, 0.0, 1.0];
        let (e, _) = combine_difficulty(&d_arch, &d_node, 0.0, &g);
        assert_eq!(e, d_arch);
        let (_, n) = combine_difficulty(&[0.0; 4], &d_node, 1.0, &g);
        assert_eq!(n, vec![2.0, 1.0, 3.0, 3.0, 4.0]);
    }

    #[test]
    fn isolated_node_difficulty_zero() {
        let mut g = path_graph();
        g.edges = vec![(0, 1)];
        let (_, n) = combine_difficulty(&[0.0], &[3.0], 1.0, &g);
        assert_eq!(n, vec![3.0, 3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn node_weight_examples() {
        assert_eq!(node_weights(&[0.7; 4]).unwrap(), vec![0.25; 4]);
        let w = node_weights(&[0.0, 2f64.ln()]).unwrap();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15 && (w[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(node_weights(&[]).is_err());
    }

    #[test]
    fn confidence_update_hand_computed() {
        let mut m = StructureMask::new(1, 0.0, 0.0);
        let std = apply_confidence_update(&mut m, &[(vec![1.0], 0.5), (vec![3.0], 1.5)], 0.1, 1.0);
        assert_eq!(std, vec![1.0]);
        // 0.1 * 4 / (2 * 2)
        assert!((m.scores.value[[0, 0]] + 0.1).abs() < 1e-15);
        assert!((m.gamma() + 0.1).abs() < 1e-15);

        let mut m = StructureMask::new(1, 0.0, 0.0);
        let std = apply_confidence_update(&mut m, &[(vec![0.3], 0.0)], 0.1, 1.0);
        assert_eq!(std, vec![0.0]);
        assert!((m.scores.value[[0, 0]] + 0.03).abs() < 1e-15);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = StructureMask::new(3, 1.0, 0.2);
        m.scores.value[[1, 0]] = -0.75;
        let back = StructureMask::from_checkpoint(&m.checkpoint());
        assert_eq!(back.scores.value, m.scores.value);
        assert_eq!(back.gamma(), m.gamma());
    }
}
