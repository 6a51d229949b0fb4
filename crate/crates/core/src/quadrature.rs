//! Quadrature against the law of `<x1, x2>` for uniform points on `S^{d-1}`.
//!
//! For `d >= 2` the density on `[-1, 1]` is proportional to
//! `(1 - t^2)^((d-3)/2)`; `d = 1` is the two-point law on `{-1, +1}`.
//! `d` is real so threshold searches can bisect in it.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use faer::{Mat, Side};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};

/// Nodes and weights of a rule. Weights sum to one.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type RuleKey = (usize, u64, u64);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<Rule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss-Jacobi rule for `(1-x)^alpha (1+x)^beta` on `[-1, 1]`, weights
/// normalized to sum to one. Golub-Welsch on the symmetric Jacobi matrix.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<Arc<Rule>> {
    if n == 0 {
        return Err(invalid("rule needs at least one node"));
    }
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(invalid(format!("Jacobi exponents must exceed -1, got ({alpha}, {beta})")));
    }
    let key = (n, alpha.to_bits(), beta.to_bits());
    if let Some(r) = rule_cache().lock().unwrap().get(&key) {
        return Ok(r.clone());
    }
    let rule = Arc::new(if alpha == -0.5 && beta == -0.5 {
        chebyshev_rule(n)
    } else {
        golub_welsch(n, alpha, beta)?
    });
    rule_cache().lock().unwrap().insert(key, rule.clone());
    Ok(rule)
}

fn chebyshev_rule(n: usize) -> Rule {
    let nodes = (0..n)
        .map(|i| (PI * (2 * (n - i) - 1) as f64 / (2 * n) as f64).cos())
        .collect();
    Rule {
        nodes,
        weights: vec![1.0 / n as f64; n],
    }
}

fn golub_welsch(n: usize, a: f64, b: f64) -> Result<Rule> {
    let ab = a + b;
    let mut jac = Mat::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        jac[(k, k)] = if k == 0 {
            (b - a) / (ab + 2.0)
        } else if b == a {
            0.0
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + ab;
            let off2 = if m == 1.0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * m * (m + a) * (m + b) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            let off = off2.sqrt();
            jac[(k + 1, k)] = off;
            jac[(k, k + 1)] = off;
        }
    }
    let evd = jac
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        nodes.push(s[i].clamp(-1.0, 1.0));
        weights.push(u[(0, i)] * u[(0, i)]);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(Rule { nodes, weights })
}

/// `ln` of the total mass of `(1-x)^alpha (1+x)^beta` on `[-1, 1]`.
fn ln_jacobi_mass(alpha: f64, beta: f64) -> f64 {
    (alpha + beta + 1.0) * 2f64.ln() + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(alpha + beta + 2.0)
}

/// The overlap law `mu_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapMeasure {
    d: f64,
}

/// Absolute change tolerated when the node count doubles.
pub const DOUBLING_TOLERANCE: f64 = 1e-8;

impl OverlapMeasure {
    pub fn new(d: f64) -> Result<Self> {
        if !(d == 1.0 || d >= 2.0) || !d.is_finite() {
            return Err(invalid(format!("overlap measure needs d = 1 or d >= 2, got {d}")));
        }
        Ok(Self { d })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Jacobi exponent `(d-3)/2`.
    pub fn exponent(&self) -> f64 {
        (self.d - 3.0) / 2.0
    }

    /// Node count used for integrands of polynomial degree up to `degree`.
    pub fn node_count(degree: usize) -> usize {
        256.max(4 * degree + 16)
    }

    /// Quadrature nodes and weights with `n` nodes per piece, split at the
    /// given interior breakpoints.
    pub fn rule(&self, n: usize, breakpoints: &[f64]) -> Result<Rule> {
        if self.d == 1.0 {
            return Ok(Rule {
                nodes: vec![-1.0, 1.0],
                weights: vec![0.5, 0.5],
            });
        }
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > -1.0 && b < 1.0)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let a = self.exponent();
        if cuts.is_empty() {
            let r = gauss_jacobi(n, a, a)?;
            return Ok((*r).clone());
        }
        let ln_z = ln_jacobi_mass(a, a);
        // beyond |t| = c the density is below e^-60 of its peak
        let c = if a > 0.0 { (1.0 - (-60.0 / a).exp()).sqrt() } else { 1.0 };
        let mut edges = vec![-c];
        edges.extend(cuts.into_iter().filter(|&b| b > -c && b < c));
        edges.push(c);
        let q = 32.max(n / 8);
        let legendre = gauss_jacobi(q, 0.0, 0.0)?;
        let ln_density = |t: f64| a * (1.0 - t * t).ln() - ln_z;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in edges.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            // endpoint panels absorb the singular factor; their width keeps
            // the explicit factor within e of its value at the endpoint
            let h_end = (2.0 / a.max(1.0)).min((hi - lo) / 2.0);
            if lo == -1.0 {
                let r = gauss_jacobi(n, 0.0, a)?;
                let ln_scale = (a + 1.0) * (h_end / 2.0).ln() + ln_jacobi_mass(0.0, a) - ln_z;
                for (&x, &wx) in r.nodes.iter().zip(&r.weights) {
                    let t = -1.0 + (x + 1.0) * h_end / 2.0;
                    nodes.push(t);
                    weights.push(wx * (ln_scale + a * (1.0 - t).ln()).exp());
                }
                lo = -1.0 + h_end;
            }
            if hi == 1.0 {
                let r = gauss_jacobi(n, a, 0.0)?;
                let ln_scale = (a + 1.0) * (h_end / 2.0).ln() + ln_jacobi_mass(a, 0.0) - ln_z;
                for (&x, &wx) in r.nodes.iter().zip(&r.weights) {
                    let t = 1.0 - (1.0 - x) * h_end / 2.0;
                    nodes.push(t);
                    weights.push(wx * (ln_scale + a * (1.0 + t).ln()).exp());
                }
                hi = 1.0 - h_end;
            }
            let width = 0.25f64.min(1.0 / (a.max(0.0) + 1.0).sqrt());
            let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
            let step = (hi - lo) / panels as f64;
            for p in 0..panels {
                let a0 = lo + p as f64 * step;
                for (&x, &wx) in legendre.nodes.iter().zip(&legendre.weights) {
                    let t = a0 + (x + 1.0) * step / 2.0;
                    nodes.push(t);
                    // normalized Legendre weights sum to 1 over a length-2 interval
                    weights.push(wx * step * ln_density(t).exp());
                }
            }
        }
        Ok(Rule { nodes, weights })
    }

    /// `E f(T)` with `n` nodes per piece.
    pub fn integrate_with<F: Fn(f64) -> f64>(&self, f: &F, n: usize, breakpoints: &[f64]) -> Result<f64> {
        let r = self.rule(n, breakpoints)?;
        Ok(crate::numeric::compensated_sum(
            r.nodes.iter().zip(&r.weights).map(|(&t, &w)| w * f(t)),
        ))
    }

    /// `E f(T)`, checked by doubling the node count.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, degree_hint: usize, breakpoints: &[f64]) -> Result<f64> {
        let n = Self::node_count(degree_hint);
        let coarse = self.integrate_with(&f, n, breakpoints)?;
        if self.d == 1.0 {
            return Ok(coarse);
        }
        let fine = self.integrate_with(&f, 2 * n, breakpoints)?;
        if (fine - coarse).abs() > DOUBLING_TOLERANCE || !fine.is_finite() {
            return Err(Error::NonConvergence(format!(
                "{n} nodes give {coarse}, {} give {fine} (d = {})",
                2 * n,
                self.d
            )));
        }
        Ok(fine)
    }

    /// Closed-form `E T^k`.
    pub fn moment(&self, k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        (0..k / 2).fold(1.0, |acc, i| acc * (2 * i + 1) as f64 / (self.d + 2.0 * i as f64))
    }

    /// `P(T >= tau)` via the regularized incomplete beta function.
    pub fn upper_tail(&self, tau: f64) -> f64 {
        if self.d == 1.0 {
            return match tau {
                t if t <= -1.0 => 1.0,
                t if t <= 1.0 => 0.5,
                _ => 0.0,
            };
        }
        if tau <= -1.0 {
            return 1.0;
        }
        if tau > 1.0 {
            return 0.0;
        }
        // (1 - T)/2 ~ Beta((d-1)/2, (d-1)/2)
        let s = (self.d - 1.0) / 2.0;
        let x = ((1.0 - tau) / 2.0).clamp(0.0, 1.0);
        statrs::function::beta::beta_reg(s, s, x)
    }
}
