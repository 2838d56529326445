//! Seeded randomness.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` seeded through
//! [`split_seed`], so a run is fully determined by its root seed. Child
//! seeds are derived with the SplitMix64 finalizer applied to
//! `parent ^ label * golden_gamma`, which gives independent-looking streams
//! for distinct labels and is identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` for the sub-stream named by `label`.
pub fn split_seed(parent: u64, label: u64) -> u64 {
    splitmix64(parent ^ label.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

/// Derives a child seed along a path of labels.
pub fn split_path(parent: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(parent, |acc, &l| split_seed(acc, l))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
