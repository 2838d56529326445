//! Stochastic block model graphs with Gaussian class features, plus
//! random noise-edge injection.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::graph::{SparseGraph, Splits};
use crate::error::GraphError;
use crate::numerics::rng::{rng_from_seed, split_seed};
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub mean_separation: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self {
            block_sizes: vec![100, 100],
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 16,
            mean_separation: 1.0,
            sigma: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbm: Option<SbmParams>,
    #[serde(default)]
    pub noise_edges: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
}

/// Provenance of a generated graph: which edges were injected as noise.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMeta {
    pub noise_edge_ids: Vec<usize>,
    pub params: SyntheticParams,
}

const EDGE_STREAM: u64 = 1;
const FEATURE_STREAM: u64 = 2;
const SPLIT_STREAM: u64 = 3;

pub fn gen_sbm(params: &SbmParams) -> Result<(SparseGraph, SyntheticMeta), GraphError> {
    let SbmParams {
        ref block_sizes,
        p_in,
        p_out,
        feature_dim,
        mean_separation,
        sigma,
        seed,
    } = *params;
    if block_sizes.is_empty() {
        return Err(GraphError::InvalidParams("no blocks".into()));
    }
    for (name, p) in [("p_in", p_in), ("p_out", p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(GraphError::InvalidParams(format!("{name} = {p} outside [0, 1]")));
        }
    }
    if feature_dim < block_sizes.len() {
        return Err(GraphError::InvalidParams(format!(
            "feature_dim {feature_dim} smaller than the {} classes",
            block_sizes.len()
        )));
    }
    if !(sigma >= 0.0) || !mean_separation.is_finite() {
        return Err(GraphError::InvalidParams("sigma must be >= 0 and separation finite".into()));
    }

    let labels: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let n = labels.len();

    let mut rng = rng_from_seed(split_seed(seed, EDGE_STREAM));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    // class means sit on scaled basis vectors, pairwise `mean_separation` apart
    let offset = mean_separation / std::f64::consts::SQRT_2;
    let noise = Normal::new(0.0, sigma).expect("sigma checked");
    let mut rng = rng_from_seed(split_seed(seed, FEATURE_STREAM));
    let mut features = Matrix::zeros((n, feature_dim));
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        for (k, x) in row.iter_mut().enumerate() {
            *x = noise.sample(&mut rng) + if k == labels[i] { offset } else { 0.0 };
        }
    }

    let splits = stratified_split(&labels, block_sizes.len(), split_seed(seed, SPLIT_STREAM));
    let graph = SparseGraph {
        name: "sbm".into(),
        num_nodes: n,
        num_classes: block_sizes.len(),
        edges,
        features,
        labels,
        splits,
    };
    let meta = SyntheticMeta {
        noise_edge_ids: Vec::new(),
        params: SyntheticParams {
            sbm: Some(params.clone()),
            ..Default::default()
        },
    };
    Ok((graph, meta))
}

/// 50/25/25 train/val/test split, stratified by class.
pub fn stratified_split(labels: &[usize], num_classes: usize, seed: u64) -> Splits {
    let mut rng = rng_from_seed(seed);
    let mut splits = Splits::default();
    for c in 0..num_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let n_train = members.len() / 2;
        let n_val = members.len() / 4;
        splits.train.extend_from_slice(&members[..n_train]);
        splits.val.extend_from_slice(&members[n_train..n_train + n_val]);
        splits.test.extend_from_slice(&members[n_train + n_val..]);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    splits
}

const NOISE_STREAM: u64 = 0x4e;

/// SBM graph plus `noise_edges` injected pairs, the noise drawn from a
/// stream derived from `params.seed`.
pub fn gen_noisy_sbm(params: &SbmParams, noise_edges: usize) -> Result<(SparseGraph, SyntheticMeta), GraphError> {
    let (graph, mut meta) = gen_sbm(params)?;
    if noise_edges == 0 {
        return Ok((graph, meta));
    }
    let (noisy, noise) = inject_noise_edges(&graph, noise_edges, split_seed(params.seed, NOISE_STREAM))?;
    meta.noise_edge_ids = noise.noise_edge_ids;
    meta.params.noise_edges = noise.params.noise_edges;
    meta.params.noise_seed = noise.params.noise_seed;
    Ok((noisy, meta))
}

/// Adds `count` uniformly drawn node pairs that are not yet edges.
/// Returns the ids of the injected edges in the new (sorted) edge list.
pub fn inject_noise_edges(
    graph: &SparseGraph,
    count: usize,
    seed: u64,
) -> Result<(SparseGraph, SyntheticMeta), GraphError> {
    let n = graph.num_nodes;
    let all_pairs = n * n.saturating_sub(1) / 2;
    let available = all_pairs - graph.num_edges();
    if count > available {
        return Err(GraphError::TooManyNoiseEdges {
            requested: count,
            available,
        });
    }
    let existing: HashSet<(usize, usize)> = graph.edges.iter().copied().collect();
    let mut rng = rng_from_seed(seed);
    let added: Vec<(usize, usize)> = if count * 2 <= available {
        let mut picked = HashSet::with_capacity(count);
        let mut order = Vec::with_capacity(count);
        while order.len() < count {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let e = (a.min(b), a.max(b));
            if !existing.contains(&e) && picked.insert(e) {
                order.push(e);
            }
        }
        order
    } else {
        let mut free: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .filter(|e| !existing.contains(e))
            .collect();
        let (chosen, _) = free.partial_shuffle(&mut rng, count);
        chosen.to_vec()
    };

    let added_set: HashSet<(usize, usize)> = added.iter().copied().collect();
    let mut edges = graph.edges.clone();
    edges.extend_from_slice(&added);
    edges.sort_unstable();
    let noise_edge_ids = edges
        .iter()
        .enumerate()
        .filter(|(_, e)| added_set.contains(e))
        .map(|(i, _)| i)
        .collect();
    let out = SparseGraph {
        edges,
        ..graph.clone()
    };
    let meta = SyntheticMeta {
        noise_edge_ids,
        params: SyntheticParams {
            sbm: None,
            noise_edges: count,
            noise_seed: Some(seed),
        },
    };
    Ok((out, meta))
}
