//! Importance-sampling posterior over latent points for tiny graphs, and
//! the closed forms it is checked against.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::sample_sphere_points;
use crate::graph::{sample_rgg, Graph, ModelKernel};
use crate::kernels::{edge_density, standardize_with, KernelSpec, ProfileFn, StandardizedKernel};
use crate::numeric::{compensated_sum, MeanSe};
use crate::rng::{stream_rng, substream};
use crate::spectra::{kernel_spectrum, trace_power, KernelSpectrum};

pub const MAX_POSTERIOR_N: usize = 12;
pub const MAX_POSTERIOR_D: usize = 8;
pub const MAX_ENSEMBLE: usize = 10_000_000;
/// Below this effective sample size estimates are flagged as untrusted.
pub const MIN_TRUSTED_ESS: f64 = 100.0;

/// `E[X_12 | A_12 = a]` for uniform sphere points.
pub fn single_edge_posterior_mean(sk: &StandardizedKernel, a: bool) -> Result<f64> {
    let p = sk.p();
    let mu = sk.measure()?;
    let moment = mu.integrate(|t| t * sk.eval(t), sk.degree_hint() + 1, &sk.breakpoints())?;
    let odds = p / (1.0 - p);
    Ok(if a {
        moment / odds.sqrt()
    } else {
        -moment * odds.sqrt()
    })
}

/// Both sides of `E[(E[eta(X_12) | A_12])^2] = tr(kappa^3)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaIdentity {
    /// Through the conditional means, with `eta` from the spectrum and the
    /// integrals by quadrature.
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

pub fn eta_conditional_identity_check(spec: &KernelSpectrum, sk: &StandardizedKernel) -> Result<EtaIdentity> {
    let p = sk.p();
    let mu = sk.measure()?;
    let degree = 2 * spec.entries.len() + sk.degree_hint();
    let bps = sk.breakpoints();
    let kernel = sk.base();
    let on_edge = mu.integrate(|t| spec.eta(t) * kernel.eval(t), degree, &bps)? / p;
    let off_edge = mu.integrate(|t| spec.eta(t) * (1.0 - kernel.eval(t)), degree, &bps)? / (1.0 - p);
    let lhs = p * on_edge * on_edge + (1.0 - p) * off_edge * off_edge;
    let tr3 = trace_power(spec, 3)?.value;
    let rhs = tr3 * tr3;
    Ok(EtaIdentity {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Prior draws of the latent cloud weighted by the likelihood of a graph.
///
/// Only the pairwise overlaps of each draw are kept; every posterior
/// functional used here depends on the cloud through them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// Row `k` holds `<x_i, x_j>` of draw `k` for `i < j` in lexicographic order.
    overlaps: Vec<f64>,
    /// `log L(A | x) - log L_ER(A)`, shifted so the weights sum to one.
    pub log_weights: Vec<f64>,
    pub ess: f64,
}

/// Posterior expectation with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorEstimate {
    pub value: f64,
    pub se: f64,
    pub ess: f64,
    pub trusted: bool,
}

pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

fn draw_overlaps(n: usize, d: usize, seed: u64, index: u64, out: &mut [f64]) {
    let mut rng = stream_rng(seed, index);
    let mut pts = vec![0.0; n * d];
    for i in 0..n {
        let row = &mut pts[i * d..(i + 1) * d];
        let mut norm = 0.0;
        for v in row.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
            norm += *v * *v;
        }
        let inv = 1.0 / norm.sqrt();
        row.iter_mut().for_each(|v| *v *= inv);
    }
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            out[k] = (0..d).map(|a| pts[i * d + a] * pts[j * d + a]).sum::<f64>().clamp(-1.0, 1.0);
            k += 1;
        }
    }
}

/// Weights `m` prior draws by the likelihood of `a` under `kernel` at
/// dimension `d`.
pub fn posterior_ensemble(a: &Graph, kernel: &KernelSpec, d: usize, m: usize, seed: u64) -> Result<WeightedEnsemble> {
    let n = a.n();
    if n < 2 || n > MAX_POSTERIOR_N {
        return Err(Error::SizeLimit(format!("posterior sampling needs 2 <= n <= {MAX_POSTERIOR_N}, got {n}")));
    }
    if d < 2 || d > MAX_POSTERIOR_D {
        return Err(Error::SizeLimit(format!("posterior sampling needs 2 <= d <= {MAX_POSTERIOR_D}, got {d}")));
    }
    if m < 2 || m > MAX_ENSEMBLE {
        return Err(Error::SizeLimit(format!("ensemble size must lie in 2..={MAX_ENSEMBLE}, got {m}")));
    }
    let p = edge_density(kernel, d as f64)?;
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let pairs = n * (n - 1) / 2;
    let edges: Vec<bool> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| a.has_edge(i, j))
        .collect();
    let mut overlaps = vec![0.0; m * pairs];
    let mut log_weights = vec![0.0; m];
    overlaps
        .par_chunks_mut(pairs)
        .zip(log_weights.par_iter_mut())
        .enumerate()
        .try_for_each(|(k, (row, lw))| {
            draw_overlaps(n, d, seed, k as u64, row);
            let mut acc = 0.0;
            for (t, &edge) in row.iter().zip(&edges) {
                let prob = kernel.eval(*t);
                if prob <= 0.0 || prob >= 1.0 {
                    return Err(Error::DegenerateWeights(format!(
                        "K({t}) = {prob} gives a zero likelihood factor"
                    )));
                }
                acc += if edge { prob.ln() - lp } else { (1.0 - prob).ln() - lq };
            }
            *lw = acc;
            Ok(())
        })?;
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total = compensated_sum(raw.iter().copied());
    let sq = compensated_sum(raw.iter().map(|w| w * w));
    let ess = total * total / sq;
    let shift = max + total.ln();
    log_weights.iter_mut().for_each(|l| *l -= shift);
    Ok(WeightedEnsemble {
        n,
        d,
        m,
        overlaps,
        log_weights,
        ess,
    })
}

impl WeightedEnsemble {
    pub fn pairs(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Overlaps of draw `k`.
    pub fn draw(&self, k: usize) -> &[f64] {
        let p = self.pairs();
        &self.overlaps[k * p..(k + 1) * p]
    }

    /// Normalized weights.
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn trusted(&self) -> bool {
        self.ess >= MIN_TRUSTED_ESS
    }

    fn estimate_range<F: Fn(&[f64]) -> f64>(&self, range: std::ops::Range<usize>, f: &F) -> PosteriorEstimate {
        let lw = &self.log_weights[range.clone()];
        let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|l| (l - max).exp()).collect();
        let total = compensated_sum(w.iter().copied());
        let vals: Vec<f64> = range.clone().map(|k| f(self.draw(k))).collect();
        let value = compensated_sum(w.iter().zip(&vals).map(|(w, v)| w * v)) / total;
        let var = compensated_sum(w.iter().zip(&vals).map(|(w, v)| (w / total).powi(2) * (v - value).powi(2)));
        let ess = total * total / compensated_sum(w.iter().map(|w| w * w));
        PosteriorEstimate {
            value,
            se: var.sqrt(),
            ess,
            trusted: ess >= MIN_TRUSTED_ESS,
        }
    }

    /// Self-normalized estimate of `E[f(overlaps) | A]`.
    pub fn posterior_mean<F: Fn(&[f64]) -> f64>(&self, f: F) -> PosteriorEstimate {
        self.estimate_range(0..self.m, &f)
    }

    pub fn pair_mean(&self, i: usize, j: usize) -> PosteriorEstimate {
        let k = pair_index(self.n, i, j);
        self.posterior_mean(|x| x[k])
    }

    /// `E[f | A]^2` as the product of estimates from the two halves of the
    /// ensemble, which are independent given `A`.
    pub fn squared_mean<F: Fn(&[f64]) -> f64>(&self, f: F) -> (f64, PosteriorEstimate, PosteriorEstimate) {
        let half = self.m / 2;
        let a = self.estimate_range(0..half, &f);
        let b = self.estimate_range(half..2 * half, &f);
        (a.value * b.value, a, b)
    }
}

/// Which conditional mean gets squared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFunctional {
    /// `<x_1, x_2>`.
    Overlap,
    /// `eta(<x_1, x_2>) = E_z[kappa(<x_1, z>) kappa(<x_2, z>)]`.
    Eta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateValue {
    pub replicate: usize,
    pub seed: u64,
    pub value: f64,
    /// Smaller of the two half-ensemble effective sizes.
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquaredMeanEstimate {
    pub estimate: MeanSe,
    pub replicates: Vec<ReplicateValue>,
    /// Whether every half-ensemble reached [`MIN_TRUSTED_ESS`].
    pub trusted: bool,
}

/// Inputs shared by the replicates of one squared-posterior-mean estimate.
#[derive(Debug, Clone)]
pub struct PosteriorCell {
    kernel: KernelSpec,
    eta: Option<KernelSpectrum>,
    pub n: usize,
    pub d: usize,
    pub m: usize,
}

impl PosteriorCell {
    pub fn new(kernel: &KernelSpec, functional: PairFunctional, n: usize, d: usize, m: usize) -> Result<Self> {
        let eta = match functional {
            PairFunctional::Eta => {
                let p = edge_density(kernel, d as f64)?;
                Some(kernel_spectrum(&standardize_with(kernel, d as f64, p)?)?)
            }
            PairFunctional::Overlap => None,
        };
        Ok(PosteriorCell {
            kernel: kernel.clone(),
            eta,
            n,
            d,
            m,
        })
    }

    /// One graph drawn from the model and its half-ensemble product.
    pub fn run_replicate(&self, replicate: usize, seed: u64) -> Result<ReplicateValue> {
        let model = ModelKernel::InnerProduct(self.kernel.clone());
        let cloud = sample_sphere_points(self.n, self.d, substream(seed, 0))?;
        let g = sample_rgg(&model, &cloud, substream(seed, 1))?;
        let ens = posterior_ensemble(&g, &self.kernel, self.d, self.m, substream(seed, 2))?;
        let (value, a, b) = match &self.eta {
            Some(spec) => ens.squared_mean(|x| spec.eta(x[0])),
            None => ens.squared_mean(|x| x[0]),
        };
        Ok(ReplicateValue {
            replicate,
            seed,
            value,
            ess: a.ess.min(b.ess),
        })
    }
}

/// `E_A[(E[f(x_1, x_2) | A])^2]` over graphs drawn from the model, with each
/// square formed by the half-ensemble product.
pub fn squared_posterior_mean(
    kernel: &KernelSpec,
    functional: PairFunctional,
    n: usize,
    d: usize,
    replicates: usize,
    m: usize,
    seed: u64,
) -> Result<SquaredMeanEstimate> {
    if replicates < 2 {
        return Err(invalid("need at least two graph replicates"));
    }
    let cell = PosteriorCell::new(kernel, functional, n, d, m)?;
    let values = (0..replicates)
        .map(|r| cell.run_replicate(r, substream(seed, r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let estimate = MeanSe::of(&values.iter().map(|v| v.value).collect::<Vec<_>>());
    Ok(SquaredMeanEstimate {
        estimate,
        trusted: values.iter().all(|v| v.ess >= MIN_TRUSTED_ESS),
        replicates: values,
    })
}

/// `g(2) = E_A[(E[kappa(<x_1, z>) kappa(<x_2, z>) | A])^2]` with `z` an
/// independent point.
pub fn g2_estimate(
    kernel: &KernelSpec,
    n: usize,
    d: usize,
    replicates: usize,
    m: usize,
    seed: u64,
) -> Result<SquaredMeanEstimate> {
    squared_posterior_mean(kernel, PairFunctional::Eta, n, d, replicates, m, seed)
}
