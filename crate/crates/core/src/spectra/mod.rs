//! Gegenbauer expansions of standardized kernels and trace powers of the
//! kernel operator on the sphere.

mod wick;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

pub use wick::{spherical_multigraph_expectation, wick_multigraph_expectation, Multigraph, WickValue, MAX_WICK_EDGES};

use crate::error::{invalid, Error, Result};
use crate::kernels::{ProfileFn, StandardizedKernel};
use crate::numeric::{compensated_sum, MeanSe};
use crate::quadrature::OverlapMeasure;
use crate::rng::stream_rng;

pub const DEFAULT_KMAX: usize = 40;
pub const MAX_KMAX: usize = 200;
/// Adaptive truncation stops once `lambda_k^2 m_k` falls below this
/// fraction of `||kappa||^2`.
pub const INCREMENT_TOLERANCE: f64 = 1e-14;
/// `tail_mass / ||kappa||^2` above this is flagged.
pub const TAIL_WARNING: f64 = 1e-3;

/// `C_k^lambda(t)` by the three-term recurrence.
pub fn gegenbauer_eval(k: usize, lambda: f64, t: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 2.0 * lambda * t;
    for j in 1..k {
        let jf = j as f64;
        let next = (2.0 * (jf + lambda) * t * cur - (jf + 2.0 * lambda - 1.0) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `P_0..=P_kmax` at `t`, where `P_k = C_k / C_k(1)` (Chebyshev at `lambda = 0`).
fn normalized_gegenbauer(kmax: usize, lambda: f64, t: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if kmax == 0 {
        return;
    }
    out[1] = t;
    for k in 1..kmax {
        let kf = k as f64;
        out[k + 1] = (2.0 * (kf + lambda) * t * out[k] - kf * out[k - 1]) / (2.0 * lambda + kf);
    }
}

fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `dim H_k^d = binom(d-1+k, d-1) - binom(d-3+k, d-1)`; for `d = 2` the
/// limit `1, 2, 2, ...`.
pub fn harmonic_dim(d: u64, k: u64) -> Result<BigUint> {
    if d < 2 {
        return Err(invalid(format!("harmonic dimensions need d >= 2, got {d}")));
    }
    if d == 2 {
        return Ok(BigUint::from(if k == 0 { 1u32 } else { 2 }));
    }
    Ok(binomial_big(d - 1 + k, d - 1) - binomial_big(d - 3 + k, d - 1))
}

/// `ln dim H_k^d` for real `d >= 2`.
pub fn ln_harmonic_dim(d: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if d == 2.0 {
        return 2f64.ln();
    }
    let kf = k as f64;
    ((2.0 * kf + d - 2.0) / (d - 2.0)).ln() + ln_gamma(d - 2.0 + kf) - ln_gamma(d - 2.0) - ln_gamma(kf + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEntry {
    pub k: usize,
    /// Coefficient on `C_k^lambda` (on `T_k` when `d = 2`).
    pub alpha: f64,
    /// Operator eigenvalue `lambda/(k + lambda) * alpha_k`.
    pub eigenvalue: f64,
    pub ln_multiplicity: f64,
    /// Exact multiplicity when `d` is an integer.
    pub multiplicity: Option<BigUint>,
}

impl SpectrumEntry {
    pub fn multiplicity_f64(&self) -> f64 {
        self.ln_multiplicity.exp()
    }

    /// `lambda_k^m * m_k` without overflow.
    pub fn weighted_power(&self, m: u32) -> f64 {
        if self.eigenvalue == 0.0 {
            return 0.0;
        }
        let sign = if self.eigenvalue < 0.0 && m % 2 == 1 { -1.0 } else { 1.0 };
        sign * (m as f64 * self.eigenvalue.abs().ln() + self.ln_multiplicity).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpectrum {
    pub d: f64,
    pub entries: Vec<SpectrumEntry>,
    pub kmax: usize,
    /// `||kappa||^2` in `L^2(mu_d)`.
    pub norm_sq: f64,
    /// `||kappa||^2 - sum lambda_k^2 m_k`.
    pub tail_mass: f64,
}

impl KernelSpectrum {
    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.entries.get(k).map(|e| e.eigenvalue).unwrap_or(0.0)
    }

    /// `b_k = d^k lambda_k`.
    pub fn scaled_eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalue(k) * self.d.powi(k as i32)
    }

    /// Profile of the squared operator, `eta(t) = sum_k lambda_k^2 m_k P_k(t)`,
    /// so that `eta(<y, z>) = E_x[kappa(<x, y>) kappa(<x, z>)]`.
    pub fn eta(&self, t: f64) -> f64 {
        let kmax = self.entries.len() - 1;
        let mut p = vec![0.0; kmax + 1];
        normalized_gegenbauer(kmax, (self.d - 2.0) / 2.0, t, &mut p);
        compensated_sum(self.entries.iter().map(|e| e.weighted_power(2) * p[e.k]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub kmax: usize,
    pub adaptive: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            kmax: DEFAULT_KMAX,
            adaptive: true,
        }
    }
}

/// Projections `lambda_k = E[kappa(T) P_k(T)]` for `k <= kmax` plus
/// `E kappa^2`, using `n` nodes per piece.
fn project(sk: &StandardizedKernel, kmax: usize, n: usize) -> Result<(Vec<f64>, f64, f64)> {
    let mu = sk.measure()?;
    let lambda = (sk.d() - 2.0) / 2.0;
    let rule = mu.rule(n, &sk.breakpoints())?;
    let mut sums = vec![Vec::with_capacity(rule.nodes.len()); kmax + 1];
    let mut sq = Vec::with_capacity(rule.nodes.len());
    let mut p = vec![0.0; kmax + 1];
    let mut sup = 0.0f64;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = sk.eval(t);
        sup = sup.max(v.abs());
        normalized_gegenbauer(kmax, lambda, t, &mut p);
        for k in 0..=kmax {
            sums[k].push(w * v * p[k]);
        }
        sq.push(w * v * v);
    }
    let lams = sums.into_iter().map(compensated_sum).collect();
    Ok((lams, compensated_sum(sq), sup))
}

/// Gegenbauer coefficients and operator eigenvalues of `kappa`.
pub fn gegenbauer_coefficients(sk: &StandardizedKernel, kmax: usize) -> Result<KernelSpectrum> {
    spectrum_with(sk, SpectrumOptions { kmax, adaptive: false })
}

/// Spectrum with adaptive truncation up to [`MAX_KMAX`].
pub fn kernel_spectrum(sk: &StandardizedKernel) -> Result<KernelSpectrum> {
    spectrum_with(sk, SpectrumOptions::default())
}

pub fn spectrum_with(sk: &StandardizedKernel, opts: SpectrumOptions) -> Result<KernelSpectrum> {
    if opts.kmax < 1 {
        return Err(invalid("kmax must be at least 1"));
    }
    let d = sk.d();
    if d < 2.0 {
        return Err(invalid(format!("spectra need d >= 2, got {d}")));
    }
    let mut kmax = opts.kmax.min(MAX_KMAX);
    loop {
        let spec = spectrum_at(sk, kmax)?;
        if !opts.adaptive || kmax >= MAX_KMAX {
            return Ok(spec);
        }
        // both parities must have settled
        let floor = INCREMENT_TOLERANCE * spec.norm_sq;
        let settled = spec.entries[kmax - 1..]
            .iter()
            .all(|e| e.weighted_power(2) < floor);
        if settled {
            return Ok(spec);
        }
        kmax = (2 * kmax).min(MAX_KMAX);
    }
}

fn spectrum_at(sk: &StandardizedKernel, kmax: usize) -> Result<KernelSpectrum> {
    let d = sk.d();
    let lambda = (d - 2.0) / 2.0;
    let n = OverlapMeasure::node_count(kmax + sk.degree_hint());
    let (coarse, _, _) = project(sk, kmax, n)?;
    let (fine, norm_sq, sup) = project(sk, kmax, 2 * n)?;
    let drift = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if drift > crate::quadrature::DOUBLING_TOLERANCE {
        return Err(Error::NonConvergence(format!(
            "Gegenbauer projections moved by {drift} when doubling {n} nodes (kmax = {kmax})"
        )));
    }
    // below this a projection is rounding noise
    let noise = 64.0 * f64::EPSILON * sup.max(f64::MIN_POSITIVE);
    let integer_d = d.fract() == 0.0 && d <= u32::MAX as f64;
    let entries: Vec<SpectrumEntry> = fine
        .iter()
        .enumerate()
        .map(|(k, &raw)| {
            let eigenvalue = if raw.abs() < noise { 0.0 } else { raw };
            let alpha = if lambda == 0.0 {
                // d = 2: Chebyshev coefficient
                eigenvalue * if k == 0 { 1.0 } else { 2.0 }
            } else {
                eigenvalue * (k as f64 + lambda) / lambda
            };
            SpectrumEntry {
                k,
                alpha,
                eigenvalue,
                ln_multiplicity: ln_harmonic_dim(d, k),
                multiplicity: if integer_d { harmonic_dim(d as u64, k as u64).ok() } else { None },
            }
        })
        .collect();
    let captured = compensated_sum(entries.iter().map(|e| e.weighted_power(2)));
    Ok(KernelSpectrum {
        d,
        entries,
        kmax,
        norm_sq,
        tail_mass: norm_sq - captured,
    })
}

/// Coefficient on `C_k^lambda` through `E[kappa^(k)(T) (1 - T^2)^k]`, for
/// polynomial kernels.
pub fn rodrigues_coefficient(sk: &StandardizedKernel, k: usize) -> Result<f64> {
    let coeffs = sk
        .polynomial_coeffs()
        .ok_or_else(|| Error::InvalidKernel(format!("{} has no closed-form derivatives", sk.base())))?;
    let d = sk.d();
    if d <= 2.0 {
        return Err(invalid(format!("the Rodrigues route needs d > 2, got {d}")));
    }
    if k >= coeffs.len() {
        return Ok(0.0);
    }
    // k-th derivative
    let deriv: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .skip(k)
        .map(|(i, &c)| c * ((i - k + 1)..=i).map(|j| j as f64).product::<f64>())
        .collect();
    let degree = deriv.len() - 1 + 2 * k;
    let mu = sk.measure()?;
    let expectation = mu.integrate(
        |t| deriv.iter().rev().fold(0.0, |acc, &c| acc * t + c) * (1.0 - t * t).powi(k as i32),
        degree,
        &[],
    )?;
    let mut denom = d - 2.0;
    for j in 0..k {
        denom *= d - 1.0 + 2.0 * j as f64;
    }
    Ok((d + 2.0 * k as f64 - 2.0) / denom * expectation)
}

/// `tr(kappa^m)` with an error bar from the truncation tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceValue {
    pub value: f64,
    /// Bound on the omitted terms, `tail^(m/2)`.
    pub tail_bound: f64,
    /// Set when `tail_mass / ||kappa||^2` exceeds [`TAIL_WARNING`].
    pub tail_warning: bool,
}

pub fn trace_power(spec: &KernelSpectrum, m: u32) -> Result<TraceValue> {
    if m < 2 {
        return Err(invalid(format!("trace powers need m >= 2, got {m}")));
    }
    let value = compensated_sum(spec.entries.iter().map(|e| e.weighted_power(m)));
    let tail = spec.tail_mass.max(0.0);
    Ok(TraceValue {
        value,
        tail_bound: tail.powf(m as f64 / 2.0),
        tail_warning: spec.norm_sq > 0.0 && tail / spec.norm_sq > TAIL_WARNING,
    })
}

const MC_CHUNK: usize = 1 << 16;

/// Monte Carlo `E[kappa(<y1,y2>) ... kappa(<ym,y1>)]` over independent
/// uniform points on `S^{d-1}` (integer `d`).
pub fn trace_power_mc(sk: &StandardizedKernel, m: usize, samples: usize, seed: u64) -> Result<MeanSe> {
    if m < 2 {
        return Err(invalid(format!("cycles need m >= 2, got {m}")));
    }
    let d = sk.d();
    if d.fract() != 0.0 || d < 2.0 {
        return Err(invalid(format!("Monte Carlo cycles need integer d >= 2, got {d}")));
    }
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let d = d as usize;
    let chunks = samples.div_ceil(MC_CHUNK);
    let values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut rng = stream_rng(seed, c as u64);
            let mut pts = vec![0.0; m * m.min(d)];
            (0..count)
                .map(|_| {
                    cycle_points(&mut rng, m, d, &mut pts);
                    let w = m.min(d);
                    let mut prod = 1.0;
                    for i in 0..m {
                        let j = (i + 1) % m;
                        let ip: f64 = (0..w).map(|c| pts[i * w + c] * pts[j * w + c]).sum();
                        prod *= sk.eval(ip.clamp(-1.0, 1.0));
                    }
                    prod
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(MeanSe::of(&values))
}

/// `m` independent uniform points on `S^{d-1}` written in a frame where
/// point `i` lies in the span of the first `i + 1` axes. Point `i` needs
/// `i` Gaussian coordinates plus a chi-square for the orthogonal remainder.
fn cycle_points<R: Rng>(rng: &mut R, m: usize, d: usize, out: &mut [f64]) {
    let w = m.min(d);
    out.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..m {
        let row = &mut out[i * w..(i + 1) * w];
        let free = i.min(w);
        let mut sq = 0.0;
        for x in row.iter_mut().take(free) {
            let z: f64 = StandardNormal.sample(rng);
            *x = z;
            sq += z * z;
        }
        if free < w {
            let dof = (d - free) as f64;
            let r2 = if dof == 1.0 {
                let z: f64 = StandardNormal.sample(rng);
                z * z
            } else {
                ChiSquared::new(dof).expect("positive dof").sample(rng)
            };
            row[free] = r2.sqrt();
            sq += r2;
        }
        let norm = sq.sqrt();
        row.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Exact rational-valued multiplicity identity, for tests and reports.
pub fn multiplicity_closed_form(d: u64, k: u64) -> Option<BigUint> {
    if d < 3 {
        return None;
    }
    let num = BigUint::from(d - 2 + 2 * k) * binomial_big(d - 3 + k, k);
    let den = BigUint::from(d - 2);
    if (&num % &den) != BigUint::ZERO {
        return None;
    }
    Some(num / den)
}

/// `binom(d - 3 + k, k)`, the value `C_k^((d-2)/2)(1)`.
pub fn gegenbauer_at_one(d: u64, k: u64) -> f64 {
    binomial_big(d - 3 + k, k).to_f64().unwrap_or(f64::INFINITY)
}
