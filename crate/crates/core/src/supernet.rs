//! Sequential supernet of mixed layers, architecture probabilities, top-K
//! enumeration, and discrete architecture induction.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::numerics::rng::{rng_from_seed, split_path};
use crate::numerics::{argmax, dropout_mask, softmax_vec, Grads, Matrix, Param, Tape, Var};
use crate::operators::{op_forward_tape, register_op, GraphContext, MaskMode, OpKind, OpLeaves, OpVars, OpWeights};

#[derive(Clone, Debug, PartialEq)]
pub struct SupernetConfig {
    pub in_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub layers: usize,
    pub candidates: Vec<OpKind>,
    pub dropout: f64,
    pub score_init: f64,
    pub seed: u64,
}

impl SupernetConfig {
    pub fn dims(&self) -> Vec<(usize, usize)> {
        (0..self.layers)
            .map(|l| {
                let din = if l == 0 { self.in_dim } else { self.hidden };
                let dout = if l + 1 == self.layers { self.out_dim } else { self.hidden };
                (din, dout)
            })
            .collect()
    }
}

/// One layer: every candidate operation plus its architecture logits.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedLayer {
    pub candidates: Vec<OpWeights>,
    /// `1 x |candidates|` architecture logits.
    pub alpha: Param,
}

impl MixedLayer {
    pub fn kinds(&self) -> Vec<OpKind> {
        self.candidates.iter().map(|c| c.kind).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Supernet {
    pub layers: Vec<MixedLayer>,
    pub dropout: f64,
}

/// One candidate index per layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Architecture(pub Vec<usize>);

impl Architecture {
    pub fn kinds(&self, net: &Supernet) -> Vec<OpKind> {
        self.0
            .iter()
            .zip(&net.layers)
            .map(|(&o, layer)| layer.candidates[o].kind)
            .collect()
    }
}

/// Discrete architecture by operation kind, serialised as e.g. `["gcn","sage"]`.
pub type ArchSpec = Vec<OpKind>;

pub fn arch_to_json(kinds: &[OpKind]) -> String {
    serde_json::to_string(kinds).expect("serialisable")
}

pub fn arch_from_json(text: &str) -> Result<ArchSpec> {
    let arch: ArchSpec = serde_json::from_str(text)?;
    if arch.is_empty() {
        return Err(Error::InvalidArgument("architecture has no layers".into()));
    }
    Ok(arch)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardOptions {
    pub eval_mode: bool,
    pub dropout_seed: u64,
}

impl ForwardOptions {
    pub fn eval() -> Self {
        Self {
            eval_mode: true,
            dropout_seed: 0,
        }
    }

    pub fn train(dropout_seed: u64) -> Self {
        Self {
            eval_mode: false,
            dropout_seed,
        }
    }
}

/// Which parameter groups receive gradients in a recorded pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Trainable {
    pub weights: bool,
    pub alpha: bool,
}

pub struct LayerVars {
    pub ops: Vec<Option<(OpVars, Option<OpLeaves>)>>,
    pub alpha: Var,
}

/// Tape handles for a registered supernet.
pub struct NetVars {
    pub layers: Vec<LayerVars>,
}

impl NetVars {
    /// Adds the gradients of every trainable leaf into `net`.
    pub fn accumulate(&self, grads: &Grads, net: &mut Supernet) {
        for (lv, layer) in self.layers.iter().zip(net.layers.iter_mut()) {
            for (ov, w) in lv.ops.iter().zip(layer.candidates.iter_mut()) {
                if let Some((_, Some(leaves))) = ov {
                    leaves.accumulate(grads, w);
                }
            }
            if let Some(g) = grads.get(lv.alpha) {
                layer.alpha.accumulate(g);
            }
        }
    }
}

impl Supernet {
    /// Glorot-initialised supernet with all architecture logits at zero.
    pub fn new(config: &SupernetConfig) -> Result<Self> {
        if config.layers == 0 {
            return Err(Error::Config("supernet needs at least one layer".into()));
        }
        if config.candidates.is_empty() {
            return Err(Error::Config("empty candidate set".into()));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", config.dropout)));
        }
        let mut layers = Vec::with_capacity(config.layers);
        for (l, (din, dout)) in config.dims().into_iter().enumerate() {
            let candidates = config
                .candidates
                .iter()
                .enumerate()
                .map(|(o, &kind)| {
                    let mut rng = rng_from_seed(split_path(config.seed, &[l as u64, o as u64]));
                    OpWeights::init(kind, din, dout, config.score_init, &mut rng)
                })
                .collect::<Vec<_>>();
            let alpha = Param::new(format!("alpha.{l}"), Matrix::zeros((1, candidates.len())));
            layers.push(MixedLayer { candidates, alpha });
        }
        Ok(Self {
            layers,
            dropout: config.dropout,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].candidates[0].din
    }

    pub fn weight_params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.layers.iter_mut().flat_map(|l| l.candidates.iter_mut().flat_map(|c| c.params_mut()))
    }

    pub fn weight_params(&self) -> impl Iterator<Item = &Param> {
        self.layers.iter().flat_map(|l| l.candidates.iter().flat_map(|c| c.params()))
    }

    pub fn alpha_params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.layers.iter_mut().map(|l| &mut l.alpha)
    }

    pub fn alpha_params(&self) -> impl Iterator<Item = &Param> {
        self.layers.iter().map(|l| &l.alpha)
    }

    /// Records the net's parameters on the tape. With `only`, just the
    /// candidates selected by that architecture are registered.
    pub fn register(&self, tape: &mut Tape, mode: &MaskMode, trainable: Trainable, only: Option<&Architecture>) -> NetVars {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let ops = layer
                    .candidates
                    .iter()
                    .enumerate()
                    .map(|(o, w)| match only {
                        Some(a) if a.0[l] != o => None,
                        _ => Some(register_op(tape, w, mode, trainable.weights)),
                    })
                    .collect();
                let alpha = if trainable.alpha {
                    tape.param(layer.alpha.value.clone())
                } else {
                    tape.constant(layer.alpha.value.clone())
                };
                LayerVars { ops, alpha }
            })
            .collect();
        NetVars { layers }
    }
}

fn dropout(tape: &mut Tape, h: Var, rate: f64, seed: u64, layer: usize, opts: ForwardOptions) -> Result<Var> {
    if opts.eval_mode || rate == 0.0 {
        return Ok(h);
    }
    let (r, c) = tape.value(h).dim();
    let mask = dropout_mask(r, c, rate, split_path(seed, &[layer as u64]), false)?;
    let mv = tape.constant(mask);
    Ok(tape.mul(h, mv))
}

/// Runs the layer stack. `layer_op` produces each layer's output from its
/// input. Returns the logits and the representation fed to the last layer.
pub(crate) fn run_layers(
    tape: &mut Tape,
    num_layers: usize,
    rate: f64,
    x: Var,
    opts: ForwardOptions,
    mut layer_op: impl FnMut(&mut Tape, usize, Var) -> Result<Var>,
) -> Result<(Var, Var)> {
    let mut h = x;
    let mut hidden = x;
    for l in 0..num_layers {
        if l > 0 {
            h = tape.relu(h);
            hidden = h;
            h = dropout(tape, h, rate, opts.dropout_seed, l, opts)?;
        }
        h = layer_op(tape, l, h)?;
    }
    Ok((h, hidden))
}

/// Mixed forward: each layer outputs `sum_o softmax(alpha)[o] * op_o(h)`,
/// with ReLU and dropout between layers.
pub fn supernet_forward_tape(
    tape: &mut Tape,
    net: &Supernet,
    vars: &NetVars,
    ctx: &GraphContext,
    x: Var,
    slot_mask: Var,
    opts: ForwardOptions,
) -> Result<(Var, Var)> {
    check_input(tape, net, x)?;
    run_layers(tape, net.num_layers(), net.dropout, x, opts, |tape, l, h| {
        let lv = &vars.layers[l];
        let probs = tape.softmax_row(lv.alpha);
        let mut acc: Option<Var> = None;
        for (o, (ov, w)) in lv.ops.iter().zip(&net.layers[l].candidates).enumerate() {
            let (op_vars, _) = ov.as_ref().ok_or_else(|| Error::InvalidArgument("candidate not registered".into()))?;
            let out = op_forward_tape(tape, w.kind, h, ctx, slot_mask, op_vars)?;
            let term = tape.scale_by_entry(out, probs, o);
            acc = Some(match acc {
                Some(a) => tape.add(a, term),
                None => term,
            });
        }
        Ok(acc.expect("non-empty candidate set"))
    })
}

/// Forward pass of one discrete architecture through the supernet's weights.
pub fn discrete_forward_tape(
    tape: &mut Tape,
    net: &Supernet,
    vars: &NetVars,
    arch: &Architecture,
    ctx: &GraphContext,
    x: Var,
    slot_mask: Var,
    opts: ForwardOptions,
) -> Result<(Var, Var)> {
    check_input(tape, net, x)?;
    check_arch(net, arch)?;
    run_layers(tape, net.num_layers(), net.dropout, x, opts, |tape, l, h| {
        let o = arch.0[l];
        let (op_vars, _) = vars.layers[l].ops[o]
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("candidate not registered".into()))?;
        op_forward_tape(tape, net.layers[l].candidates[o].kind, h, ctx, slot_mask, op_vars)
    })
}

fn check_input(tape: &Tape, net: &Supernet, x: Var) -> Result<()> {
    let d = tape.value(x).ncols();
    if d != net.in_dim() {
        return Err(Error::Dimension(format!("input width {d}, supernet expects {}", net.in_dim())));
    }
    Ok(())
}

pub(crate) fn check_arch(net: &Supernet, arch: &Architecture) -> Result<()> {
    if arch.0.len() != net.num_layers() {
        return Err(Error::InvalidArgument(format!(
            "architecture has {} layers, supernet {}",
            arch.0.len(),
            net.num_layers()
        )));
    }
    for (l, (&o, layer)) in arch.0.iter().zip(&net.layers).enumerate() {
        if o >= layer.candidates.len() {
            return Err(Error::Index(format!("layer {l} op {o} of {}", layer.candidates.len())));
        }
    }
    Ok(())
}

/// Value-only mixed forward with soft weight masks.
pub fn supernet_forward(
    net: &Supernet,
    ctx: &GraphContext,
    x: &Matrix,
    slot_mask: &Matrix,
    opts: ForwardOptions,
) -> Result<(Matrix, Matrix)> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let mv = tape.constant(slot_mask.clone());
    let vars = net.register(&mut tape, &MaskMode::Soft, Trainable::default(), None);
    let (z, h) = supernet_forward_tape(&mut tape, net, &vars, ctx, xv, mv, opts)?;
    Ok((tape.value(z).clone(), tape.value(h).clone()))
}

/// Value-only discrete forward with soft weight masks.
pub fn discrete_forward(
    net: &Supernet,
    arch: &Architecture,
    ctx: &GraphContext,
    x: &Matrix,
    slot_mask: &Matrix,
    opts: ForwardOptions,
) -> Result<Matrix> {
    check_arch(net, arch)?;
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let mv = tape.constant(slot_mask.clone());
    let vars = net.register(&mut tape, &MaskMode::Soft, Trainable::default(), Some(arch));
    let (z, _) = discrete_forward_tape(&mut tape, net, &vars, arch, ctx, xv, mv, opts)?;
    Ok(tape.value(z).clone())
}

/// `softmax(alpha_l)` for every layer.
pub fn arch_probs(net: &Supernet) -> Vec<Vec<f64>> {
    net.layers
        .iter()
        .map(|l| softmax_vec(&l.alpha.value.row(0).to_vec()))
        .collect()
}

/// Per-layer argmax of the architecture logits, ties to the lowest index.
pub fn induce_architecture(net: &Supernet) -> Architecture {
    Architecture(net.layers.iter().map(|l| argmax(l.alpha.value.iter().copied())).collect())
}

pub fn top_k_architectures(net: &Supernet, k: usize) -> Result<Vec<(Architecture, f64)>> {
    top_k_from_probs(&arch_probs(net), k)
}

struct Ranked {
    prob: f64,
    ops: Vec<usize>,
}

impl Ranked {
    // Ordering::Less means "ranks ahead": larger probability, then
    // lexicographically smaller op indices.
    fn rank(&self, other: &Self) -> Ordering {
        other.prob.total_cmp(&self.prob).then_with(|| self.ops.cmp(&other.ops))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other)
    }
}

/// The `k` architectures with the largest product of per-layer
/// probabilities, best first, ties broken by lexicographic op indices.
///
/// Streams the product space through a bounded heap whose top is the
/// currently worst kept candidate.
pub fn top_k_from_probs(probs: &[Vec<f64>], k: usize) -> Result<Vec<(Architecture, f64)>> {
    let space: usize = probs.iter().map(Vec::len).product();
    if k == 0 || k > space {
        return Err(Error::TooManyArchitectures {
            requested: k,
            available: space,
        });
    }
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
    let mut ops = vec![0usize; probs.len()];
    loop {
        let prob = ops.iter().zip(probs).fold(1.0, |acc, (&o, p)| acc * p[o]);
        let cand = Ranked { prob, ops: ops.clone() };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }
        // odometer increment, last layer fastest
        let mut l = probs.len();
        loop {
            if l == 0 {
                let mut out: Vec<Ranked> = heap.into_vec();
                out.sort();
                return Ok(out.into_iter().map(|r| (Architecture(r.ops), r.prob)).collect());
            }
            l -= 1;
            ops[l] += 1;
            if ops[l] < probs[l].len() {
                break;
            }
            ops[l] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_layer_tie_break() {
        let probs = vec![vec![0.5, 0.5], vec![0.9, 0.1]];
        let top = top_k_from_probs(&probs, 2).unwrap();
        assert_eq!(top[0].0, Architecture(vec![0, 0]));
        assert_eq!(top[1].0, Architecture(vec![1, 0]));
        assert!((top[0].1 - 0.45).abs() < 1e-15);
        assert!((top[1].1 - 0.45).abs() < 1e-15);
    }

    #[test]
    fn full_space_sums_to_one() {
        let probs = vec![softmax_vec(&[0.3, -1.0, 2.0]), softmax_vec(&[0.0, 0.7])];
        let all = top_k_from_probs(&probs, 6).unwrap();
        assert_eq!(all.len(), 6);
        assert!((all.iter().map(|a| a.1).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(all.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(top_k_from_probs(&probs, 7).is_err());
        assert!(top_k_from_probs(&probs, 0).is_err());
    }

    #[test]
    fn arch_json() {
        let arch = arch_from_json(r#"["gcn","sage"]"#).unwrap();
        assert_eq!(arch, vec![OpKind::Gcn, OpKind::Sage]);
        assert_eq!(arch_to_json(&arch), r#"["gcn","sage"]"#);
        assert!(arch_from_json("[]").is_err());
        assert!(arch_from_json(r#"["gin"]"#).is_err());
    }
}
