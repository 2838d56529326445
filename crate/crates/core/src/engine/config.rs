use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::OpKind;
use crate::sparsifier::{CurriculumParams, LossNodeSet};

/// Hyper-parameters of one search plus the retraining protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Total search epochs `T`.
    pub epochs: usize,
    /// Warm-up epochs `r`: epochs `1..=r` train only weights and weight masks.
    pub warmup: usize,
    /// Architectures sampled per curriculum step.
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Entropy coefficient of the structure loss.
    pub beta: f64,
    /// Confidence smoothing `c`.
    pub smoothing: f64,
    pub lr_weights: f64,
    pub lr_weight_masks: f64,
    pub lr_alpha: f64,
    pub lr_structure: f64,
    pub dropout: f64,
    pub hidden: usize,
    pub layers: usize,
    pub candidates: Vec<OpKind>,
    pub weight_score_init: f64,
    pub structure_score_init: f64,
    pub gamma_init: f64,
    pub loss_nodes: LossNodeSet,
    pub symmetric_node_view: bool,
    pub retrain_epochs: usize,
    pub retrain_runs: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            warmup: 10,
            k: 2,
            lambda1: 1.0,
            lambda2: 1.0,
            beta: 0.001,
            smoothing: 1e-4,
            lr_weights: 0.01,
            lr_weight_masks: 0.2,
            lr_alpha: 3e-4,
            lr_structure: 0.1,
            dropout: 0.5,
            hidden: 64,
            layers: 2,
            candidates: vec![OpKind::Gcn, OpKind::Gat, OpKind::Sage, OpKind::Arma, OpKind::Linear],
            weight_score_init: 3.0,
            structure_score_init: 3.0,
            gamma_init: 0.0,
            loss_nodes: LossNodeSet::All,
            symmetric_node_view: false,
            retrain_epochs: 300,
            retrain_runs: 10,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return fail("epochs must be positive".into());
        }
        if self.warmup > self.epochs {
            return fail(format!("warmup {} exceeds epochs {}", self.warmup, self.epochs));
        }
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        for (name, v) in [
            ("lr_weights", self.lr_weights),
            ("lr_weight_masks", self.lr_weight_masks),
            ("lr_alpha", self.lr_alpha),
            ("lr_structure", self.lr_structure),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.smoothing < 0.0 || !self.smoothing.is_finite() {
            return fail(format!("smoothing {} must be non-negative", self.smoothing));
        }
        if self.layers == 0 || self.hidden == 0 {
            return fail("layers and hidden width must be positive".into());
        }
        if self.candidates.is_empty() {
            return fail("empty candidate set".into());
        }
        let space = self.candidates.len().checked_pow(self.layers as u32).unwrap_or(usize::MAX);
        if self.k > space {
            return fail(format!("k = {} exceeds the {space} architectures in the search space", self.k));
        }
        if self.retrain_epochs == 0 || self.retrain_runs == 0 {
            return fail("retrain_epochs and retrain_runs must be positive".into());
        }
        Ok(())
    }

    pub fn curriculum(&self) -> CurriculumParams {
        CurriculumParams {
            k: self.k,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            beta: self.beta,
            smoothing: self.smoothing,
            lr: self.lr_structure,
            loss_nodes: self.loss_nodes,
            symmetric_node_view: self.symmetric_node_view,
        }
    }
}
