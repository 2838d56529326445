//! Dense and sparse kernels, a reverse-mode gradient tape, Adam, and
//! seeded randomness. All arithmetic is `f64`.

mod adam;
pub mod gradcheck;
mod kernels;
pub mod rng;
mod tape;

pub use adam::{adam_step, Adam, AdamConfig, AdamState, Param};
pub use kernels::{argmax, dropout_mask, sigmoid, softmax_vec, spmm, weighted_cross_entropy, Matrix};
pub use tape::{binary_entropy, Grads, Tape, Var};

/// Glorot-uniform initialisation `U(-a, a)` with `a = sqrt(6 / (rows + cols))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_shape_simple_fn((rows, cols), || rng.random_range(-a..a))
}
