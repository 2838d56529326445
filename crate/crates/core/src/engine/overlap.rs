use std::collections::BTreeSet;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::numerics::rng::rng_from_seed;

/// Number of edges removed at ratio `p`.
pub fn removal_count(p: f64, total_edges: usize) -> usize {
    (p * total_edges as f64).round() as usize
}

/// Shared fraction of two equal-size removal sets:
/// `|A ∩ B| / round(p * total_edges)`.
pub fn overlap(removed_a: &[usize], removed_b: &[usize], p: f64, total_edges: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("removal ratio {p} outside [0, 1]")));
    }
    let n = removal_count(p, total_edges);
    if n == 0 {
        return Err(Error::InvalidArgument(format!("ratio {p} removes no edges out of {total_edges}")));
    }
    let a = edge_set(removed_a, total_edges)?;
    let b = edge_set(removed_b, total_edges)?;
    if a.len() != n || b.len() != n {
        return Err(Error::InvalidArgument(format!(
            "removal sets of size {} and {} for ratio {p} of {total_edges} edges (expected {n})",
            a.len(),
            b.len()
        )));
    }
    Ok(a.intersection(&b).count() as f64 / n as f64)
}

fn edge_set(ids: &[usize], total: usize) -> Result<BTreeSet<usize>> {
    let set: BTreeSet<usize> = ids.iter().copied().collect();
    if set.len() != ids.len() {
        return Err(Error::InvalidArgument("duplicate edge ids in removal set".into()));
    }
    if let Some(&bad) = set.iter().find(|&&e| e >= total) {
        return Err(Error::Index(format!("edge {bad} of {total}")));
    }
    Ok(set)
}

/// The `round(p * E)` edges with the lowest scores, ties to the lower id.
pub fn lowest_scored(scores: &[f64], p: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order.truncate(removal_count(p, scores.len()));
    order.sort_unstable();
    order
}

/// A uniformly random removal set of size `round(p * E)`.
pub fn random_removal(total_edges: usize, p: f64, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let mut ids = sample(&mut rng, total_edges, removal_count(p, total_edges)).into_vec();
    ids.sort_unstable();
    ids
}
