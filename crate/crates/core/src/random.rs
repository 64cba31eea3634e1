//! Seeded randomness.
//!
//! Every random quantity in the crate is drawn from a ChaCha20 stream whose
//! key is derived from a user seed and a short field tag:
//!
//! ```text
//! stream_seed = splitmix64(seed XOR fnv1a64(tag))
//! ```
//!
//! The 64-bit stream seed is expanded to a 256-bit ChaCha key by
//! `rand_chacha::ChaCha20Rng::seed_from_u64`. Standard normals come from
//! `rand_distr::StandardNormal` (ziggurat). Both are pure integer/IEEE
//! arithmetic, so a given `(seed, tag)` pair reproduces the same numbers on
//! any platform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

fn fnv1a64(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the sub-stream identified by `tag`.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(tag))
}

/// Independent generator for the sub-stream `tag` of `seed`.
pub fn stream(seed: u64, tag: &str) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive_seed(seed, tag))
}

pub fn normal_vector<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Matrix with i.i.d. standard normal entries, filled in column-major order.
pub fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DMatrix::from_vec(rows, cols, data)
}
