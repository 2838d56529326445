use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphio::{gcn_norm, SparseGraph};
use crate::numerics::rng::{rng_from_seed, split_path};
use crate::numerics::{argmax, Adam, AdamConfig, Matrix, Tape};
use crate::operators::{count_params, op_forward_tape, register_op, GraphContext, MaskMode, OpKind, OpWeights};
use crate::supernet::{run_layers, ForwardOptions};

use super::config::SearchConfig;

const RETRAIN_STREAM: u64 = 0x5245;
const INIT_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub test_acc: f64,
    pub best_val_acc: f64,
    /// 1-based epoch whose validation accuracy was highest (first on ties).
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub val_acc: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrainMetrics {
    pub runs: Vec<RunMetrics>,
    pub accuracy_mean: f64,
    /// Population standard deviation across runs.
    pub accuracy_std: f64,
    pub params_total: usize,
    pub params_kept: usize,
}

/// `(din, dout)` of every layer.
pub fn layer_dims(in_dim: usize, hidden: usize, out_dim: usize, layers: usize) -> Vec<(usize, usize)> {
    (0..layers)
        .map(|l| {
            let din = if l == 0 { in_dim } else { hidden };
            let dout = if l + 1 == layers { out_dim } else { hidden };
            (din, dout)
        })
        .collect()
}

/// Binary weight masks of one operation: 1 iff the score is positive.
pub fn binarize_weights(w: &OpWeights) -> Vec<Matrix> {
    w.binary_masks()
}

/// Parameter count of a discrete architecture, optionally after pruning.
pub fn arch_params(kinds: &[OpKind], dims: &[(usize, usize)], masks: Option<&[Vec<Matrix>]>) -> usize {
    kinds
        .iter()
        .zip(dims)
        .enumerate()
        .map(|(l, (&k, &(din, dout)))| count_params(k, din, dout, masks.map(|m| m[l].as_slice())))
        .sum()
}

/// Seeds of the `n` retraining runs of a search seeded with `seed`.
pub fn retrain_seeds(seed: u64, n: usize) -> Vec<u64> {
    (0..n).map(|r| split_path(seed, &[RETRAIN_STREAM, r as u64])).collect()
}

/// Fraction of `nodes` whose argmax prediction matches the label; 0 for an empty set.
pub fn accuracy(logits: &Matrix, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes
        .iter()
        .filter(|&&i| argmax(logits.row(i).iter().copied()) == labels[i])
        .count();
    hits as f64 / nodes.len() as f64
}

fn check_masks(kinds: &[OpKind], dims: &[(usize, usize)], masks: Option<&[Vec<Matrix>]>) -> Result<()> {
    let Some(masks) = masks else { return Ok(()) };
    if masks.len() != kinds.len() {
        return Err(Error::Dimension(format!("{} weight masks for {} layers", masks.len(), kinds.len())));
    }
    for (l, ((k, &(din, dout)), m)) in kinds.iter().zip(dims).zip(masks).enumerate() {
        let shapes: Vec<_> = m.iter().map(|x| x.dim()).collect();
        if shapes != k.tensor_shapes(din, dout) {
            return Err(Error::Dimension(format!("layer {l} {k}: mask shapes {shapes:?}")));
        }
    }
    Ok(())
}

/// Trains one freshly initialised copy of the architecture on `graph`
/// (coefficients recomputed from its own degrees) and picks the epoch with
/// the best validation accuracy.
///
/// Layer `l` draws its Glorot weights from `split_path(seed, [1, l])`;
/// epoch `t` draws dropout from `split_path(seed, [2, t])`. Masked weights
/// start at zero and receive zero gradient, so they stay at zero.
pub fn train_once(
    kinds: &[OpKind],
    masks: Option<&[Vec<Matrix>]>,
    graph: &SparseGraph,
    config: &SearchConfig,
    seed: u64,
) -> Result<RunMetrics> {
    if graph.splits.train.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    let dims = layer_dims(graph.num_features(), config.hidden, graph.num_classes, kinds.len());
    check_masks(kinds, &dims, masks)?;
    let mut layers: Vec<OpWeights> = kinds
        .iter()
        .zip(&dims)
        .enumerate()
        .map(|(l, (&k, &(din, dout)))| {
            let mut rng = rng_from_seed(split_path(seed, &[INIT_STREAM, l as u64]));
            let mut w = OpWeights::init(k, din, dout, 0.0, &mut rng);
            if let Some(m) = masks {
                for (p, mask) in w.weights.iter_mut().zip(&m[l]) {
                    p.value = &p.value * mask;
                }
            }
            w
        })
        .collect();
    let modes: Vec<MaskMode> = match masks {
        Some(m) => m.iter().map(|x| MaskMode::Binary(x.clone())).collect(),
        None => vec![MaskMode::Unmasked; kinds.len()],
    };
    let ctx = GraphContext::new(graph, &gcn_norm(graph))?;
    let slot_mask = ctx.full_mask();
    let labels = Rc::new(graph.labels.clone());
    let train = Rc::new(graph.splits.train.clone());
    let theta = Rc::new(vec![1.0 / train.len() as f64; train.len()]);
    let mut adam = Adam::new(
        layers.iter().flat_map(|w| w.weights.iter().chain(std::iter::once(&w.bias))),
        AdamConfig::with_lr(config.lr_weights),
    );

    let forward = |tape: &mut Tape, layers: &[OpWeights], train_mode: bool, opts: ForwardOptions| -> Result<_> {
        let leaves: Vec<_> = layers
            .iter()
            .zip(&modes)
            .map(|(w, mode)| register_op(tape, w, mode, train_mode))
            .collect();
        let x = tape.constant(graph.features.clone());
        let m = tape.constant(slot_mask.clone());
        let (z, _) = run_layers(tape, layers.len(), config.dropout, x, opts, |tape, l, h| {
            op_forward_tape(tape, layers[l].kind, h, &ctx, m, &leaves[l].0)
        })?;
        Ok((z, leaves))
    };

    let mut train_loss = Vec::with_capacity(config.retrain_epochs);
    let mut val_acc = Vec::with_capacity(config.retrain_epochs);
    let mut best = (f64::NEG_INFINITY, 0.0, 0usize);
    for epoch in 1..=config.retrain_epochs {
        let mut tape = Tape::new();
        let opts = ForwardOptions::train(split_path(seed, &[DROPOUT_STREAM, epoch as u64]));
        let (z, leaves) = forward(&mut tape, &layers, true, opts)?;
        let loss = tape.cross_entropy(z, labels.clone(), train.clone(), theta.clone())?;
        let lv = tape.scalar(loss);
        if !lv.is_finite() {
            return Err(Error::NonFinite(format!("retrain loss at epoch {epoch}")));
        }
        let grads = tape.backward(loss)?;
        for ((_, lf), w) in leaves.iter().zip(layers.iter_mut()) {
            lf.as_ref().expect("trainable").accumulate(&grads, w);
        }
        adam.step(layers.iter_mut().flat_map(|w| w.weights.iter_mut().chain(std::iter::once(&mut w.bias))));
        train_loss.push(lv);

        let mut tape = Tape::new();
        let (z, _) = forward(&mut tape, &layers, false, ForwardOptions::eval())?;
        let logits = tape.value(z);
        let va = accuracy(logits, &graph.labels, &graph.splits.val);
        val_acc.push(va);
        if va > best.0 {
            best = (va, accuracy(logits, &graph.labels, &graph.splits.test), epoch);
        }
    }
    Ok(RunMetrics {
        seed,
        test_acc: best.1,
        best_val_acc: best.0,
        best_epoch: best.2,
        train_loss,
        val_acc,
    })
}

/// Retrains the architecture once per seed and aggregates test accuracy.
/// Runs are spread over `threads` workers; results keep seed order.
pub fn retrain_and_eval(
    kinds: &[OpKind],
    masks: Option<&[Vec<Matrix>]>,
    graph: &SparseGraph,
    config: &SearchConfig,
    seeds: &[u64],
    threads: usize,
) -> Result<RetrainMetrics> {
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("architecture has no layers".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("no retraining runs requested".into()));
    }
    let dims = layer_dims(graph.num_features(), config.hidden, graph.num_classes, kinds.len());
    check_masks(kinds, &dims, masks)?;
    let threads = threads.clamp(1, seeds.len());
    let runs: Vec<RunMetrics> = if threads == 1 {
        seeds
            .iter()
            .map(|&s| train_once(kinds, masks, graph, config, s))
            .collect::<Result<_>>()?
    } else {
        let mut slots: Vec<Option<Result<RunMetrics>>> = (0..seeds.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    scope.spawn(move || {
                        (t..seeds.len())
                            .step_by(threads)
                            .map(|i| (i, train_once(kinds, masks, graph, config, seeds[i])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("retrain worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|r| r.expect("every run scheduled")).collect::<Result<_>>()?
    };
    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.test_acc).sum::<f64>() / n;
    let var = runs.iter().map(|r| (r.test_acc - mean).powi(2)).sum::<f64>() / n;
    Ok(RetrainMetrics {
        runs,
        accuracy_mean: mean,
        accuracy_std: var.sqrt(),
        params_total: arch_params(kinds, &dims, None),
        params_kept: arch_params(kinds, &dims, masks),
    })
}
