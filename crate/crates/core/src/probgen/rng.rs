//! Seeded streams and the variate transforms every generator draws from.
//!
//! Each matrix or vector of a generated problem reads from its own ChaCha8
//! stream `(seed, stream_id)`, so adding a draw to one block never shifts
//! the values of another.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn normal(rng: &mut Stream, mean: f64, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + sd * z
}

/// Uniform on `[lo, hi)`.
pub fn uniform(rng: &mut Stream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn normal_vec(rng: &mut Stream, len: usize, mean: f64, sd: f64) -> Vec<f64> {
    (0..len).map(|_| normal(rng, mean, sd)).collect()
}

pub fn uniform_vec(rng: &mut Stream, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| uniform(rng, lo, hi)).collect()
}

/// Number of nonzeros for a `percent`% dense block of `total` entries,
/// rounded up in exact integer arithmetic.
pub fn nnz_for(total: usize, percent: usize) -> usize {
    (total * percent).div_ceil(100)
}

/// Exactly `nnz_for(nrows * ncols, percent)` distinct positions, in
/// column-major order.
pub fn sparse_pattern(rng: &mut Stream, nrows: usize, ncols: usize, percent: usize) -> Vec<(usize, usize)> {
    let total = nrows * ncols;
    let count = nnz_for(total, percent);
    let mut flat = index::sample(rng, total, count).into_vec();
    flat.sort_unstable();
    flat.into_iter().map(|k| (k % nrows, k / nrows)).collect()
}
