//! Per-trial seed derivation.
//!
//! ```text
//! fnv(s)     = 64-bit FNV-1a of the UTF-8 bytes of s
//! base       = fmix64(master ^ fmix64(fnv(kind) ^ fmix64(fnv(kernel))))
//! pack       = n << 40 | d << 20 | trial      (n < 2^24, d < 2^20, trial < 2^20)
//! trial_seed = fmix64(base ^ pack)
//! ```
//!
//! `fmix64` is the SplitMix64 finalizer (see [`crate::rng::fmix64`]), `kind`
//! is the per-cell experiment name (`detect`, `recover`, ...) and `kernel` is
//! the canonical kernel string. For a fixed base the map from `(n, d, trial)`
//! to seeds is a composition of bijections, so distinct cells never share a
//! seed.

use crate::error::{invalid, Result};
use crate::rng::fmix64;

pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub const N_BITS: u32 = 24;
pub const D_BITS: u32 = 20;
pub const TRIAL_BITS: u32 = 20;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn seed_base(master: u64, kind: &str, kernel: &str) -> u64 {
    fmix64(master ^ fmix64(fnv1a64(kind.as_bytes()) ^ fmix64(fnv1a64(kernel.as_bytes()))))
}

/// Packs `(n, d, trial)` into disjoint bit fields.
pub fn pack_cell(n: usize, d: usize, trial: usize) -> Result<u64> {
    let fits = |x: usize, bits: u32| (x as u64) < (1u64 << bits);
    if !(fits(n, N_BITS) && fits(d, D_BITS) && fits(trial, TRIAL_BITS)) {
        return Err(invalid(format!(
            "seed packing needs n < 2^{N_BITS}, d < 2^{D_BITS}, trial < 2^{TRIAL_BITS}; got n = {n}, d = {d}, trial = {trial}"
        )));
    }
    Ok((n as u64) << (D_BITS + TRIAL_BITS) | (d as u64) << TRIAL_BITS | trial as u64)
}

pub fn trial_seed(base: u64, n: usize, d: usize, trial: usize) -> Result<u64> {
    Ok(fmix64(base ^ pack_cell(n, d, trial)?))
}
