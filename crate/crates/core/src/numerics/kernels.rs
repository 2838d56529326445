use ndarray::Array2;
use rand::Rng;

use super::rng::rng_from_seed;
use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// Sparse-times-dense product: `out[dst] += weight * x[src]` for every
/// directed edge `(src, dst)`. Rows without incoming edges stay zero.
pub fn spmm(edges: &[(usize, usize)], edge_weights: &[f64], x: &Matrix) -> Result<Matrix> {
    if edges.len() != edge_weights.len() {
        return Err(Error::Dimension(format!(
            "{} edges but {} weights",
            edges.len(),
            edge_weights.len()
        )));
    }
    let n = x.nrows();
    if let Some(&(s, d)) = edges.iter().find(|&&(s, d)| s >= n || d >= n) {
        return Err(Error::Index(format!("edge ({s}, {d}) with {n} nodes")));
    }
    Ok(spmm_unchecked(edges, edge_weights, x))
}

pub(crate) fn spmm_unchecked(edges: &[(usize, usize)], w: &[f64], x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.raw_dim());
    for (&(src, dst), &wt) in edges.iter().zip(w) {
        let xs = x.row(src);
        let mut o = out.row_mut(dst);
        o.scaled_add(wt, &xs);
    }
    out
}

/// Numerically stable softmax (max subtraction).
pub fn softmax_vec(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_sum_exp(row: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = row.clone().fold(f64::NEG_INFINITY, f64::max);
    max + row.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `sum_i weights[k] * -log softmax(logits[node_set[k]])[target]`.
///
/// `weights` is aligned with `node_set`.
pub fn weighted_cross_entropy(
    logits: &Matrix,
    targets: &[usize],
    node_set: &[usize],
    weights: &[f64],
) -> Result<f64> {
    validate_ce(logits, targets, node_set, weights)?;
    Ok(node_set
        .iter()
        .zip(weights)
        .map(|(&i, &w)| {
            let row = logits.row(i);
            w * (log_sum_exp(row.iter().copied()) - row[targets[i]])
        })
        .sum())
}

pub(crate) fn validate_ce(
    logits: &Matrix,
    targets: &[usize],
    node_set: &[usize],
    weights: &[f64],
) -> Result<()> {
    if node_set.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    if node_set.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} nodes but {} weights",
            node_set.len(),
            weights.len()
        )));
    }
    for &i in node_set {
        if i >= logits.nrows() || i >= targets.len() {
            return Err(Error::Index(format!("node {i} outside {} rows", logits.nrows())));
        }
        if targets[i] >= logits.ncols() {
            return Err(Error::Index(format!(
                "target {} of node {i} with {} classes",
                targets[i],
                logits.ncols()
            )));
        }
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidArgument("negative or NaN sample weight".into()));
    }
    Ok(())
}

/// Inverted-dropout multiplier: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`. Returns all ones when `eval_mode` is set.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, seed: u64, eval_mode: bool) -> Result<Matrix> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
    }
    if eval_mode || rate == 0.0 {
        return Ok(Matrix::ones((rows, cols)));
    }
    let keep = 1.0 / (1.0 - rate);
    let mut rng = rng_from_seed(seed);
    Ok(Matrix::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    }))
}

pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in row.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn spmm_self_loops_is_identity() {
        let x = array![[1.0, -2.0], [3.0, 0.5], [4.0, 4.0]];
        let edges = [(0, 0), (1, 1), (2, 2)];
        assert_eq!(spmm(&edges, &[1.0; 3], &x).unwrap(), x);
    }

    #[test]
    fn spmm_single_edge() {
        let x = array![[1.0], [5.0]];
        assert_eq!(spmm(&[(0, 1)], &[2.0], &x).unwrap(), array![[0.0], [2.0]]);
    }

    #[test]
    fn spmm_empty_and_bad_index() {
        let x = array![[1.0], [5.0]];
        assert_eq!(spmm(&[], &[], &x).unwrap(), Matrix::zeros((2, 1)));
        assert!(matches!(spmm(&[(0, 2)], &[1.0], &x), Err(Error::Index(_))));
        assert!(matches!(spmm(&[(0, 1)], &[], &x), Err(Error::Dimension(_))));
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_vec(&[0.0, 0.0, 0.0]);
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax_vec(&[0.0, 2f64.ln(), 3f64.ln()]);
        for (a, b) in p.iter().zip([1.0 / 6.0, 1.0 / 3.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        let shifted = softmax_vec(&[100.0, 100.0 + 2f64.ln(), 100.0 + 3f64.ln()]);
        for (a, b) in p.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert!(sigmoid(-100.0) < 1e-40);
        assert!(sigmoid(-100.0) > 0.0);
        assert!(sigmoid(40.0) < 1.0 || sigmoid(40.0) == 1.0);
    }

    #[test]
    fn cross_entropy_examples() {
        let logits = array![[60.0, 0.0, 0.0], [0.0, 0.0, 55.0]];
        let l = weighted_cross_entropy(&logits, &[0, 2], &[0, 1], &[1.0, 1.0]).unwrap();
        assert!(l < 1e-20);

        let uniform = Matrix::zeros((1, 4));
        let l = weighted_cross_entropy(&uniform, &[2], &[0], &[1.0]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);

        let logits = array![[0.3, -1.0], [2.0, 0.1]];
        let one = weighted_cross_entropy(&logits, &[1, 0], &[0, 1], &[0.7, 1.3]).unwrap();
        let two = weighted_cross_entropy(&logits, &[1, 0], &[0, 1], &[1.4, 2.6]).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-14);

        assert!(matches!(
            weighted_cross_entropy(&logits, &[1, 0], &[], &[]),
            Err(Error::EmptyNodeSet)
        ));
    }

    #[test]
    fn dropout_examples() {
        assert_eq!(dropout_mask(3, 4, 0.0, 9, false).unwrap(), Matrix::ones((3, 4)));
        assert_eq!(dropout_mask(3, 4, 0.5, 9, true).unwrap(), Matrix::ones((3, 4)));
        assert!(dropout_mask(3, 4, 1.0, 9, false).is_err());

        let m = dropout_mask(1000, 1000, 0.5, 42, false).unwrap();
        let zeros = m.iter().filter(|&&v| v == 0.0).count() as f64 / 1e6;
        assert!((zeros - 0.5).abs() < 0.01, "zero fraction {zeros}");
        assert!(m.iter().all(|&v| v == 0.0 || v == 2.0));
        assert_eq!(m, dropout_mask(1000, 1000, 0.5, 42, false).unwrap());
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax([0.1, 0.9, 0.0]), 1);
        assert_eq!(argmax([0.5, 0.5, 0.5]), 0);
    }
}
