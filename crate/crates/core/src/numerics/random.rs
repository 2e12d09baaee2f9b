use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Seeded generator used everywhere randomness is needed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows × cols` matrix of i.i.d. N(0, 1) draws, deterministic in `seed`.
pub fn sample_standard_normal(rows: usize, cols: usize, seed: u64) -> Result<Tensor> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "standard normal sample of {}x{}",
            rows, cols
        )));
    }
    let mut rng = rng_from_seed(seed);
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Tensor::matrix(rows, cols, data)
}

/// FNV-1a, used to derive per-key seeds that do not depend on iteration order.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn derive_seed(seed: u64, key: &str) -> u64 {
    stable_hash(key.as_bytes()) ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}
