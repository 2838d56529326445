//! Central finite-difference gradient checking.
//!
//! The checker only ever evaluates forward values, so it is independent of
//! every backward rule on the tape.

use super::kernels::Matrix;
use super::tape::{Tape, Var};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    pub worst_input: usize,
    pub worst_entry: usize,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// Denominator floor for the relative error, so that entries whose true
/// derivative is zero are compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;

/// Compares tape gradients of the scalar built by `f` against central
/// differences with step `h`, for every entry of every input.
pub fn check_gradients<F>(inputs: &[Matrix], h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Matrix> = vars
        .iter()
        .zip(inputs)
        .map(|(v, m)| grads.get(*v).cloned().unwrap_or_else(|| Matrix::zeros(m.raw_dim())))
        .collect();

    let eval = |perturbed: &[Matrix]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = perturbed.iter().map(|m| t.constant(m.clone())).collect();
        let o = f(&mut t, &vs)?;
        Ok(t.scalar(o))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_input: 0,
        worst_entry: 0,
        checked: 0,
    };
    let mut work: Vec<Matrix> = inputs.to_vec();
    for (which, input) in inputs.iter().enumerate() {
        for entry in 0..input.len() {
            let base = *input.iter().nth(entry).unwrap();
            *work[which].iter_mut().nth(entry).unwrap() = base + h;
            let plus = eval(&work)?;
            *work[which].iter_mut().nth(entry).unwrap() = base - h;
            let minus = eval(&work)?;
            *work[which].iter_mut().nth(entry).unwrap() = base;
            let numeric = (plus - minus) / (2.0 * h);
            let a = *analytic[which].iter().nth(entry).unwrap();
            let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
                report.worst_input = which;
                report.worst_entry = entry;
            }
        }
    }
    Ok(report)
}
