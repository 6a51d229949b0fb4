//! Seed mixing and random streams.
//!
//! Every random quantity is addressed by a 64-bit seed plus an index, so any
//! sub-block of an experiment can be regenerated in isolation and parallel
//! generation is independent of scheduling order. Streams are ChaCha8
//! (counter based) keyed by a SplitMix64-style mix of `(seed, index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer. A bijection on `u64`.
#[inline]
pub fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent sub-stream of `seed`.
#[inline]
pub fn substream(seed: u64, index: u64) -> u64 {
    fmix64(fmix64(seed).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// A ChaCha8 generator for the `index`-th sub-stream of `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream(seed, index))
}

/// Top 53 bits of `x` as a uniform double in `[0, 1)`.
#[inline]
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Per-pair uniforms for edge sampling.
///
/// The uniform for the unordered pair `{i, j}` depends only on the seed and
/// `(min(i, j), max(i, j))`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeUniforms {
    base: u64,
}

impl EdgeUniforms {
    const DOMAIN: u64 = 0x6564_6765_5f75_6e69;

    pub fn new(seed: u64) -> Self {
        Self {
            base: fmix64(seed ^ Self::DOMAIN),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let key = ((a as u64) << 32) | b as u64;
        unit_f64(fmix64(
            self.base
                .wrapping_add(key.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        ))
    }
}
