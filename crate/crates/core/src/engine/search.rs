use std::rc::Rc;
use std::time::Instant;

use log::{debug, info};

use super::config::SearchConfig;
use super::report::{EpochRecord, MetricsReport};
use super::retrain::{arch_params, binarize_weights, layer_dims, retrain_and_eval, retrain_seeds, RetrainMetrics};
use crate::error::{Error, Result};
use crate::graphio::{gcn_norm, SparseGraph};
use crate::numerics::rng::split_path;
use crate::numerics::{Adam, AdamConfig, Matrix, Param, Tape};
use crate::operators::{GraphContext, MaskMode, OpKind};
use crate::sparsifier::{
    curriculum_step, mask_entropy, CurriculumState, CurriculumStepReport, StructureMask, SupernetGradients,
};
use crate::supernet::{induce_architecture, supernet_forward_tape, Architecture, ForwardOptions, Supernet, SupernetConfig, Trainable};

const NET_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

fn op_weights_mut(net: &mut Supernet) -> impl Iterator<Item = &mut Param> {
    net.layers
        .iter_mut()
        .flat_map(|l| l.candidates.iter_mut())
        .flat_map(|c| c.weights.iter_mut().chain(std::iter::once(&mut c.bias)))
}

fn op_weights(net: &Supernet) -> impl Iterator<Item = &Param> {
    net.layers
        .iter()
        .flat_map(|l| l.candidates.iter())
        .flat_map(|c| c.weights.iter().chain(std::iter::once(&c.bias)))
}

fn op_scores_mut(net: &mut Supernet) -> impl Iterator<Item = &mut Param> {
    net.layers.iter_mut().flat_map(|l| l.candidates.iter_mut()).flat_map(|c| c.scores.iter_mut())
}

fn op_scores(net: &Supernet) -> impl Iterator<Item = &Param> {
    net.layers.iter().flat_map(|l| l.candidates.iter()).flat_map(|c| c.scores.iter())
}

/// The search loop broken into its individual steps so callers can observe
/// the state between them.
pub struct SearchState<'g> {
    pub graph: &'g SparseGraph,
    pub config: SearchConfig,
    pub net: Supernet,
    pub mask: StructureMask,
    pub curriculum: CurriculumState,
    pub records: Vec<EpochRecord>,
    /// Epochs completed so far.
    pub epoch: usize,
    ctx: GraphContext,
    labels: Rc<Vec<usize>>,
    train: Rc<Vec<usize>>,
    val: Rc<Vec<usize>>,
    adam_weights: Adam,
    adam_scores: Adam,
    adam_alpha: Adam,
}

impl<'g> SearchState<'g> {
    pub fn new(graph: &'g SparseGraph, config: &SearchConfig) -> Result<Self> {
        config.validate()?;
        graph.validate()?;
        if graph.splits.train.is_empty() || graph.splits.val.is_empty() {
            return Err(Error::EmptyNodeSet);
        }
        let net = Supernet::new(&SupernetConfig {
            in_dim: graph.num_features(),
            hidden: config.hidden,
            out_dim: graph.num_classes,
            layers: config.layers,
            candidates: config.candidates.clone(),
            dropout: config.dropout,
            score_init: config.weight_score_init,
            seed: split_path(config.seed, &[NET_STREAM]),
        })?;
        let adam_weights = Adam::new(op_weights(&net), AdamConfig::with_lr(config.lr_weights));
        let adam_scores = Adam::new(op_scores(&net), AdamConfig::with_lr(config.lr_weight_masks));
        let adam_alpha = Adam::new(net.alpha_params(), AdamConfig::with_lr(config.lr_alpha));
        let mask = StructureMask::new(graph.num_edges(), config.structure_score_init, config.gamma_init);
        let norm = gcn_norm(graph);
        let rc = |v: &[usize]| Rc::new(v.to_vec());
        Ok(Self {
            graph,
            config: config.clone(),
            net,
            curriculum: CurriculumState::new(graph.num_edges()),
            mask,
            records: Vec::with_capacity(config.epochs),
            epoch: 0,
            ctx: GraphContext::new(graph, &norm)?,
            labels: Rc::new(graph.labels.clone()),
            train: rc(&graph.splits.train),
            val: rc(&graph.splits.val),
            adam_weights,
            adam_scores,
            adam_alpha,
        })
    }

    pub fn context(&self) -> &GraphContext {
        &self.ctx
    }

    fn mean_weights(nodes: &[usize]) -> Rc<Vec<f64>> {
        Rc::new(vec![1.0 / nodes.len() as f64; nodes.len()])
    }

    /// Mixed-supernet cross-entropy on `nodes` over `A * M_G`, with the
    /// given parameter groups registered as trainable.
    fn mixed_loss(&self, tape: &mut Tape, trainable: Trainable, nodes: &Rc<Vec<usize>>, opts: ForwardOptions) -> Result<(f64, crate::supernet::NetVars, crate::numerics::Var)> {
        let vars = self.net.register(tape, &MaskMode::Soft, trainable, None);
        let (m, _) = self.mask.register(tape, false);
        let slot = self.ctx.expand_mask(tape, m);
        let x = tape.constant(self.graph.features.clone());
        let (z, _) = supernet_forward_tape(tape, &self.net, &vars, &self.ctx, x, slot, opts)?;
        let loss = tape.cross_entropy(z, self.labels.clone(), nodes.clone(), Self::mean_weights(nodes))?;
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("loss at epoch {}", self.epoch + 1)));
        }
        Ok((value, vars, loss))
    }

    /// One Adam step on operation weights and weight-mask scores against the
    /// training cross-entropy (dropout active). Returns the loss.
    pub fn weight_step(&mut self, epoch: usize) -> Result<f64> {
        let mut tape = Tape::new();
        let opts = ForwardOptions::train(split_path(self.config.seed, &[DROPOUT_STREAM, epoch as u64]));
        let trainable = Trainable { weights: true, alpha: false };
        let (value, vars, loss) = self.mixed_loss(&mut tape, trainable, &self.train.clone(), opts)?;
        let grads = tape.backward(loss)?;
        vars.accumulate(&grads, &mut self.net);
        self.adam_weights.step(op_weights_mut(&mut self.net));
        self.adam_scores.step(op_scores_mut(&mut self.net));
        Ok(value)
    }

    /// One curriculum sparsification step on the structure mask.
    pub fn structure_step(&mut self) -> Result<CurriculumStepReport> {
        if self.curriculum.logits.is_none() {
            self.refresh_cache()?;
        }
        let mut source = SupernetGradients {
            net: &self.net,
            ctx: &self.ctx,
            features: &self.graph.features,
            beta: self.config.beta,
        };
        curriculum_step(
            self.graph,
            &self.net,
            &mut self.mask,
            &mut self.curriculum,
            &self.config.curriculum(),
            &mut source,
        )
    }

    /// One Adam step on the architecture logits against the validation
    /// cross-entropy (no dropout). Returns the loss.
    pub fn alpha_step(&mut self) -> Result<f64> {
        let mut tape = Tape::new();
        let trainable = Trainable { weights: false, alpha: true };
        let (value, vars, loss) = self.mixed_loss(&mut tape, trainable, &self.val.clone(), ForwardOptions::eval())?;
        let grads = tape.backward(loss)?;
        vars.accumulate(&grads, &mut self.net);
        self.adam_alpha.step(self.net.alpha_params_mut());
        Ok(value)
    }

    /// Evaluation-mode mixed forward; caches logits and the last hidden
    /// representation for the next curriculum step. Returns the logits.
    pub fn refresh_cache(&mut self) -> Result<Matrix> {
        let mut tape = Tape::new();
        let vars = self.net.register(&mut tape, &MaskMode::Soft, Trainable::default(), None);
        let (m, _) = self.mask.register(&mut tape, false);
        let slot = self.ctx.expand_mask(&mut tape, m);
        let x = tape.constant(self.graph.features.clone());
        let (z, h) = supernet_forward_tape(&mut tape, &self.net, &vars, &self.ctx, x, slot, ForwardOptions::eval())?;
        let logits = tape.value(z).clone();
        self.curriculum.set_cache(logits.clone(), tape.value(h).clone());
        Ok(logits)
    }

    /// Runs the next epoch: weight step, then (after warm-up) a curriculum
    /// step and an architecture step.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let t = self.epoch + 1;
        let train_loss = self.weight_step(t)?;
        if t > self.config.warmup {
            self.structure_step()?;
            self.alpha_step()?;
        }
        let logits = self.refresh_cache()?;
        let val_acc = super::retrain::accuracy(&logits, &self.graph.labels, &self.graph.splits.val);
        let values = self.mask.mask_values();
        let mask_mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
        let record = EpochRecord {
            epoch: t,
            train_loss,
            val_acc,
            mask_mean,
            mask_entropy: mask_entropy(&values),
        };
        if !(mask_mean.is_finite() && record.mask_entropy.is_finite()) {
            return Err(Error::NonFinite(format!("structure mask at epoch {t}")));
        }
        debug!(
            "epoch {t}: train loss {:.4}, val acc {:.4}, mask mean {:.4}",
            record.train_loss, record.val_acc, record.mask_mean
        );
        self.epoch = t;
        self.records.push(record.clone());
        Ok(record)
    }

    /// Binarises both masks and induces the discrete architecture.
    pub fn finish(&self) -> SearchOutcome {
        let arch = induce_architecture(&self.net);
        let kinds = arch.kinds(&self.net);
        let edge_retention = self.mask.binarize();
        let weight_masks: Vec<Vec<Matrix>> = arch
            .0
            .iter()
            .zip(&self.net.layers)
            .map(|(&o, layer)| binarize_weights(&layer.candidates[o]))
            .collect();
        let sparsified = self.graph.with_edges_retained(&edge_retention);
        let dims = layer_dims(self.graph.num_features(), self.config.hidden, self.graph.num_classes, kinds.len());
        SearchOutcome {
            params_total: arch_params(&kinds, &dims, None),
            params_kept: arch_params(&kinds, &dims, Some(&weight_masks)),
            edges_total: self.graph.num_edges(),
            edges_kept: sparsified.num_edges(),
            arch,
            kinds,
            edge_retention,
            weight_masks,
            sparsified,
            records: self.records.clone(),
            mask: self.mask.clone(),
        }
    }
}

/// Everything the search produces before retraining.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub arch: Architecture,
    pub kinds: Vec<OpKind>,
    /// Per undirected edge of the input graph.
    pub edge_retention: Vec<bool>,
    /// Binary masks of the induced operation of each layer.
    pub weight_masks: Vec<Vec<Matrix>>,
    pub sparsified: SparseGraph,
    pub edges_total: usize,
    pub edges_kept: usize,
    pub params_total: usize,
    pub params_kept: usize,
    pub records: Vec<EpochRecord>,
    pub mask: StructureMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    pub metrics: RetrainMetrics,
    pub config: SearchConfig,
    pub wall_clock_seconds: f64,
}

impl SearchResult {
    pub fn report(&self, dataset: &str, with_timing: bool) -> MetricsReport {
        MetricsReport {
            dataset: dataset.to_string(),
            config: self.config.clone(),
            induced_arch: self.outcome.kinds.clone(),
            edges_total: self.outcome.edges_total,
            edges_kept: self.outcome.edges_kept,
            params_total: self.outcome.params_total,
            params_kept: self.outcome.params_kept,
            accuracy_mean: self.metrics.accuracy_mean,
            accuracy_std: self.metrics.accuracy_std,
            per_epoch: self.outcome.records.clone(),
            wall_clock_seconds: with_timing.then_some(self.wall_clock_seconds),
        }
    }
}

/// Runs every search epoch and returns the binarised outcome.
pub fn search_only(graph: &SparseGraph, config: &SearchConfig) -> Result<SearchOutcome> {
    let mut state = SearchState::new(graph, config)?;
    for _ in 0..config.epochs {
        state.run_epoch()?;
    }
    Ok(state.finish())
}

/// Search, binarisation, induction, then retraining of the pruned induced
/// architecture on the sparsified graph.
pub fn run_search(graph: &SparseGraph, config: &SearchConfig, threads: usize) -> Result<SearchResult> {
    let start = Instant::now();
    let outcome = search_only(graph, config)?;
    info!(
        "search done: arch {:?}, edges {}/{}, params {}/{}",
        outcome.kinds, outcome.edges_kept, outcome.edges_total, outcome.params_kept, outcome.params_total
    );
    let seeds = retrain_seeds(config.seed, config.retrain_runs);
    let metrics = retrain_and_eval(
        &outcome.kinds,
        Some(&outcome.weight_masks),
        &outcome.sparsified,
        config,
        &seeds,
        threads,
    )?;
    Ok(SearchResult {
        outcome,
        metrics,
        config: config.clone(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}
