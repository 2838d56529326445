use rand::Rng;

use super::kind::OpKind;
use crate::numerics::{glorot_uniform, sigmoid, Grads, Matrix, Param, Tape, Var};

/// Weights of one candidate operation with a same-shape mask score per
/// weight tensor. The effective weight is `W * sigmoid(S_W)`; the bias is
/// never masked.
#[derive(Clone, Debug, PartialEq)]
pub struct OpWeights {
    pub kind: OpKind,
    pub din: usize,
    pub dout: usize,
    pub weights: Vec<Param>,
    pub scores: Vec<Param>,
    pub bias: Param,
}

impl OpWeights {
    /// Glorot-uniform weights, zero bias, every mask score set to `score_init`.
    pub fn init(kind: OpKind, din: usize, dout: usize, score_init: f64, rng: &mut impl Rng) -> Self {
        let shapes = kind.tensor_shapes(din, dout);
        let names = kind.tensor_names();
        let weights: Vec<Param> = shapes
            .iter()
            .zip(names)
            .map(|(&(r, c), n)| Param::new(format!("{kind}.{n}"), glorot_uniform(r, c, rng)))
            .collect();
        let scores = shapes
            .iter()
            .zip(names)
            .map(|(&s, n)| Param::new(format!("{kind}.{n}.score"), Matrix::from_elem(s, score_init)))
            .collect();
        Self {
            kind,
            din,
            dout,
            weights,
            scores,
            bias: Param::new(format!("{kind}.bias"), Matrix::zeros((1, dout))),
        }
    }

    /// `W * sigmoid(S_W)` for every tensor.
    pub fn effective(&self) -> Vec<Matrix> {
        self.weights
            .iter()
            .zip(&self.scores)
            .map(|(w, s)| &w.value * &s.value.mapv(sigmoid))
            .collect()
    }

    /// Binary retention masks: 1 where the score is strictly positive.
    pub fn binary_masks(&self) -> Vec<Matrix> {
        self.scores
            .iter()
            .map(|s| s.value.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }))
            .collect()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.weights.iter_mut().chain(self.scores.iter_mut()).chain(std::iter::once(&mut self.bias))
    }

    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.weights.iter().chain(self.scores.iter()).chain(std::iter::once(&self.bias))
    }
}

/// How weight masks enter a forward pass.
#[derive(Clone, Debug)]
pub enum MaskMode {
    /// `W * sigmoid(S_W)`, differentiable in both.
    Soft,
    /// `W * mask` with fixed 0/1 masks (one per tensor).
    Binary(Vec<Matrix>),
    /// Raw `W`.
    Unmasked,
}

/// Effective weights of one operation as tape variables.
#[derive(Clone, Debug)]
pub struct OpVars {
    pub effective: Vec<Var>,
    pub bias: Var,
}

/// Tape leaves holding the raw parameters of one operation, when trainable.
#[derive(Clone, Debug)]
pub struct OpLeaves {
    pub weights: Vec<Var>,
    pub scores: Vec<Var>,
    pub bias: Var,
}

impl OpLeaves {
    /// Adds the gradients found for these leaves into `target`.
    pub fn accumulate(&self, grads: &Grads, target: &mut OpWeights) {
        for (v, p) in self.weights.iter().zip(target.weights.iter_mut()) {
            if let Some(g) = grads.get(*v) {
                p.accumulate(g);
            }
        }
        for (v, p) in self.scores.iter().zip(target.scores.iter_mut()) {
            if let Some(g) = grads.get(*v) {
                p.accumulate(g);
            }
        }
        if let Some(g) = grads.get(self.bias) {
            target.bias.accumulate(g);
        }
    }
}

/// Places an operation's weights on the tape.
///
/// When `trainable` is false everything is a constant and, for
/// [`MaskMode::Soft`], the effective weights are folded before recording.
pub fn register_op(tape: &mut Tape, w: &OpWeights, mode: &MaskMode, trainable: bool) -> (OpVars, Option<OpLeaves>) {
    if !trainable {
        let effective = match mode {
            MaskMode::Soft => w.effective(),
            MaskMode::Binary(masks) => w.weights.iter().zip(masks).map(|(p, m)| &p.value * m).collect(),
            MaskMode::Unmasked => w.weights.iter().map(|p| p.value.clone()).collect(),
        };
        let effective = effective.into_iter().map(|m| tape.constant(m)).collect();
        let bias = tape.constant(w.bias.value.clone());
        return (OpVars { effective, bias }, None);
    }
    let weights: Vec<Var> = w.weights.iter().map(|p| tape.param(p.value.clone())).collect();
    let bias = tape.param(w.bias.value.clone());
    let (effective, scores) = match mode {
        MaskMode::Soft => {
            let scores: Vec<Var> = w.scores.iter().map(|p| tape.param(p.value.clone())).collect();
            let eff = weights
                .iter()
                .zip(&scores)
                .map(|(&wv, &sv)| {
                    let gate = tape.sigmoid(sv);
                    tape.mul(wv, gate)
                })
                .collect();
            (eff, scores)
        }
        MaskMode::Binary(masks) => {
            let eff = weights
                .iter()
                .zip(masks)
                .map(|(&wv, m)| {
                    let mv = tape.constant(m.clone());
                    tape.mul(wv, mv)
                })
                .collect();
            (eff, Vec::new())
        }
        MaskMode::Unmasked => (weights.clone(), Vec::new()),
    };
    (OpVars { effective, bias }, Some(OpLeaves { weights, scores, bias }))
}
