//! Signed triangle and wedge statistics and the tests built on them.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use rayon::prelude::*;

use crate::distance::SimpleSubgraph;
use crate::error::{invalid, Error, Result};
use crate::geometry::{sample_gaussian_points, sample_sphere_points};
use crate::graph::{sample_er, sample_rgg, standardize_adjacency, Graph, ModelKernel, StandardizedAdjacency};
use crate::kernels::{edge_density, standardize, KernelSpec};
use crate::numeric::{binomial, normal_quantile, proportion, MeanSe};
use crate::rng::substream;
use crate::spectra::{kernel_spectrum, trace_power, KernelSpectrum};

/// Smallest trial count accepted by [`power_experiment`].
pub const MIN_TRIALS: usize = 30;

/// Search interval for the bisection in [`predicted_thresholds`].
pub const SEARCH_MIN_D: f64 = 2.0;
pub const SEARCH_MAX_D: f64 = 1e6;

/// `sum_{i<j<k} abar_ij abar_jk abar_ki`, as `tr(abar^3) / 6`.
pub fn signed_triangle_count(abar: &StandardizedAdjacency) -> f64 {
    let n = abar.n();
    let a = abar.as_mat();
    let mut sq = Mat::<f64>::zeros(n, n);
    matmul(sq.as_mut(), Accum::Replace, a, a, 1.0, Par::Seq);
    let mut terms = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            terms.push(sq[(i, j)] * a[(j, i)]);
        }
    }
    crate::numeric::compensated_sum(terms) / 6.0
}

/// Triple loop over `i < j < k`. Test oracle for [`signed_triangle_count`].
pub fn signed_triangle_count_brute(abar: &StandardizedAdjacency) -> f64 {
    let n = abar.n();
    let mut terms = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                terms.push(abar.get(i, j) * abar.get(j, k) * abar.get(k, i));
            }
        }
    }
    crate::numeric::compensated_sum(terms)
}

/// Sum over paths `j - i - k` of `abar_ij abar_ik`, from row sums.
pub fn signed_wedge_count(abar: &StandardizedAdjacency) -> f64 {
    let n = abar.n();
    let rows = (0..n).map(|i| {
        let mut s = 0.0;
        let mut sq = 0.0;
        for j in 0..n {
            if j != i {
                let v = abar.get(i, j);
                s += v;
                sq += v * v;
            }
        }
        0.5 * (s * s - sq)
    });
    crate::numeric::compensated_sum(rows)
}

/// Loop over every center and unordered pair of its other vertices.
pub fn signed_wedge_count_brute(abar: &StandardizedAdjacency) -> f64 {
    let n = abar.n();
    let mut terms = Vec::new();
    for c in 0..n {
        for j in 0..n {
            for k in (j + 1)..n {
                if j != c && k != c {
                    terms.push(abar.get(c, j) * abar.get(c, k));
                }
            }
        }
    }
    crate::numeric::compensated_sum(terms)
}

/// Signed counts of a graph, from its exact edge, wedge and triangle counts.
///
/// With `abar = lo + s A` off the diagonal, each statistic is a polynomial in
/// `lo` and `s` whose coefficients are subgraph counts, so no dense matrix is
/// formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedCounts {
    pub triangle: f64,
    pub wedge: f64,
}

pub fn signed_counts(g: &Graph, p: f64) -> Result<SignedCounts> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("standardizing needs p in (0, 1), got {p}")));
    }
    let n = g.n();
    let s = 1.0 / (p * (1.0 - p)).sqrt();
    let lo = -(p / (1.0 - p)).sqrt();
    let c3 = binomial(n, 3);
    let edges = g.edge_count() as f64;
    let wedges = g.wedge_count() as f64;
    let triangles = g.triangle_count() as f64;
    let paths = edges * n.saturating_sub(2) as f64;
    let triangle = crate::numeric::compensated_sum([
        c3 * lo * lo * lo,
        lo * lo * s * paths,
        lo * s * s * wedges,
        s * s * s * triangles,
    ]);
    let wedge = crate::numeric::compensated_sum([3.0 * c3 * lo * lo, 2.0 * lo * s * paths, s * s * wedges]);
    Ok(SignedCounts { triangle, wedge })
}

/// Moments of `T` under the RGG and the matched Erdos-Renyi graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleTheory {
    pub n: usize,
    pub mean_p: f64,
    /// Upper bound on the RGG variance.
    pub var_p_bound: f64,
    pub mean_q: f64,
    pub var_q: f64,
}

pub fn triangle_theory(spec: &KernelSpectrum, n: usize, p: f64) -> Result<TriangleTheory> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p must lie in (0, 1), got {p}")));
    }
    let tr3 = trace_power(spec, 3)?.value;
    let tr4 = trace_power(spec, 4)?.value;
    let c3 = binomial(n, 3);
    let c4 = binomial(n, 4);
    let q = 1.0 - 2.0 * p;
    let factor = 1.0 + (q.abs() / (1.0 - p)).max(q.abs() / p);
    let skew = q * q * q / (p * (1.0 - p)).powf(1.5);
    let var_p_bound = 6.0 * c4 * tr4 * factor + c3 * (1.0 + skew * tr3);
    Ok(TriangleTheory {
        n,
        mean_p: c3 * tr3,
        var_p_bound,
        mean_q: 0.0,
        var_q: c3,
    })
}

/// Mean under the RGG and null variance of a signed motif count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotifTheory {
    pub n: usize,
    pub mean_p: f64,
    pub var_q: f64,
}

impl MotifTheory {
    /// `W` with `E[abar_ij abar_ik] = per_wedge`; the null variance is the
    /// number of wedges `3 C(n, 3)`.
    pub fn wedge(n: usize, per_wedge: f64) -> Self {
        let count = 3.0 * binomial(n, 3);
        Self {
            n,
            mean_p: count * per_wedge,
            var_q: count,
        }
    }

    pub fn triangle(n: usize, per_triangle: f64) -> Self {
        let count = binomial(n, 3);
        Self {
            n,
            mean_p: count * per_triangle,
            var_q: count,
        }
    }
}

/// What a test needs: the alternative's mean and the null's moments.
pub trait TestTheory {
    fn mean_p(&self) -> f64;
    fn mean_q(&self) -> f64 {
        0.0
    }
    fn var_q(&self) -> f64;
}

impl TestTheory for TriangleTheory {
    fn mean_p(&self) -> f64 {
        self.mean_p
    }
    fn mean_q(&self) -> f64 {
        self.mean_q
    }
    fn var_q(&self) -> f64 {
        self.var_q
    }
}

impl TestTheory for MotifTheory {
    fn mean_p(&self) -> f64 {
        self.mean_p
    }
    fn var_q(&self) -> f64 {
        self.var_q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Rgg,
    Er,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Rgg => "rgg",
            Decision::Er => "er",
        }
    }
}

impl std::str::FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgg" => Ok(Decision::Rgg),
            "er" => Ok(Decision::Er),
            other => Err(invalid(format!("unknown decision `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
    /// `(statistic - mean_q) / sqrt(var_q)`.
    pub z: f64,
}

/// One-sided Gaussian-approximation test on the null side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZTest {
    pub alpha: f64,
    pub z_alpha: f64,
    pub mean_q: f64,
    pub sd_q: f64,
    /// `+1` when the alternative mean is at least the null mean, else `-1`.
    pub side: f64,
    pub threshold: f64,
}

pub fn make_test<T: TestTheory + ?Sized>(theory: &T, alpha: f64) -> Result<ZTest> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(invalid(format!("alpha must lie in (0, 0.5], got {alpha}")));
    }
    let var_q = theory.var_q();
    if !(var_q > 0.0) {
        return Err(invalid(format!("null variance must be positive, got {var_q}")));
    }
    let z_alpha = if alpha == 0.5 { 0.0 } else { -normal_quantile(alpha) };
    let sd_q = var_q.sqrt();
    let side = if theory.mean_p() < theory.mean_q() { -1.0 } else { 1.0 };
    Ok(ZTest {
        alpha,
        z_alpha,
        mean_q: theory.mean_q(),
        sd_q,
        side,
        threshold: theory.mean_q() + side * z_alpha * sd_q,
    })
}

impl ZTest {
    /// Ties go to the null.
    pub fn apply(&self, statistic: f64) -> TestOutcome {
        let decision = if self.side * (statistic - self.threshold) > 0.0 {
            Decision::Rgg
        } else {
            Decision::Er
        };
        TestOutcome {
            statistic,
            threshold: self.threshold,
            decision,
            z: (statistic - self.mean_q) / self.sd_q,
        }
    }
}

/// Which `p` standardizes each graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensityMode {
    /// The model's edge density.
    #[default]
    Analytic,
    /// Each graph's own edge fraction.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Motif {
    Triangle,
    Wedge,
}

impl Motif {
    pub fn as_str(self) -> &'static str {
        match self {
            Motif::Triangle => "triangle",
            Motif::Wedge => "wedge",
        }
    }
}

/// Statistics of one RGG/ER replicate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStats {
    pub trial: usize,
    pub seed: u64,
    pub rgg: SignedCounts,
    pub er: SignedCounts,
    /// `p` used to standardize each graph.
    pub p_rgg: f64,
    pub p_er: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotifSummary {
    pub theory: MotifTheory,
    pub test: ZTest,
    pub power: MeanSe,
    pub fpr: MeanSe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub triangle: MotifSummary,
    pub wedge: MotifSummary,
    pub trials: Vec<TrialStats>,
}

impl PowerReport {
    pub fn summary(&self, motif: Motif) -> &MotifSummary {
        match motif {
            Motif::Triangle => &self.triangle,
            Motif::Wedge => &self.wedge,
        }
    }
}

/// Edge density of the model at dimension `d`.
pub fn model_density(kernel: &ModelKernel, d: usize) -> Result<f64> {
    match kernel {
        ModelKernel::InnerProduct(k) => edge_density(k, d as f64),
        ModelKernel::Distance(k) => Ok(k.edge_density(d as f64)),
    }
}

/// Exact `E[T]` and `E[W]` per motif on the standardized scale.
fn motif_means(kernel: &ModelKernel, d: usize, p: f64) -> Result<(f64, f64)> {
    match kernel {
        ModelKernel::InnerProduct(k) => {
            let sk = standardize(k, d as f64)?;
            let spec = kernel_spectrum(&sk)?;
            // Wedges through a uniform sphere point average kappa to zero.
            Ok((trace_power(&spec, 3)?.value, 0.0))
        }
        ModelKernel::Distance(k) => {
            let v = p * (1.0 - p);
            let tri = crate::distance::signed_subgraph_expectation(
                &SimpleSubgraph::triangle(),
                k.gamma(),
                k.beta(),
                d as f64,
            )?;
            let wedge =
                crate::distance::signed_subgraph_expectation(&SimpleSubgraph::wedge(), k.gamma(), k.beta(), d as f64)?;
            Ok((tri / v.powf(1.5), wedge / v))
        }
    }
}

/// Samples the latent cloud and graph for one replicate.
pub fn sample_model(kernel: &ModelKernel, n: usize, d: usize, trial_seed: u64) -> Result<Graph> {
    let cloud_seed = substream(trial_seed, 0);
    let cloud = match kernel {
        ModelKernel::InnerProduct(_) => sample_sphere_points(n, d, cloud_seed)?,
        ModelKernel::Distance(_) => sample_gaussian_points(n, d, cloud_seed)?,
    };
    sample_rgg(kernel, &cloud, substream(trial_seed, 1))
}

fn standardized_counts(g: &Graph, p: f64, mode: DensityMode) -> Result<(SignedCounts, f64)> {
    let p = match mode {
        DensityMode::Analytic => p,
        DensityMode::Empirical => g.density(),
    };
    Ok((signed_counts(g, p)?, p))
}

/// Runs `trials` RGG and `trials` matched ER replicates and applies the
/// triangle and wedge tests at level `alpha`.
pub fn power_experiment(
    kernel: &ModelKernel,
    n: usize,
    d: usize,
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Result<PowerReport> {
    power_experiment_with(kernel, n, d, trials, alpha, seed, DensityMode::Analytic)
}

pub fn power_experiment_with(
    kernel: &ModelKernel,
    n: usize,
    d: usize,
    trials: usize,
    alpha: f64,
    seed: u64,
    mode: DensityMode,
) -> Result<PowerReport> {
    if trials < MIN_TRIALS {
        return Err(invalid(format!("power needs at least {MIN_TRIALS} trials, got {trials}")));
    }
    let cell = DetectionCell::new(kernel, n, d, alpha, mode)?;
    let stats = (0..trials)
        .into_par_iter()
        .map(|trial| cell.run_trial(trial, substream(seed, trial as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(cell.report(stats))
}

/// Theory and tests for one `(kernel, n, d)` cell. Trials run one at a time
/// from explicit seeds, so callers control seeding and scheduling.
#[derive(Debug, Clone)]
pub struct DetectionCell {
    kernel: ModelKernel,
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub mode: DensityMode,
    pub triangle: (MotifTheory, ZTest),
    pub wedge: (MotifTheory, ZTest),
}

impl DetectionCell {
    pub fn new(kernel: &ModelKernel, n: usize, d: usize, alpha: f64, mode: DensityMode) -> Result<Self> {
        if n < 3 || d == 0 {
            return Err(invalid(format!("need n >= 3 and d >= 1, got n = {n}, d = {d}")));
        }
        let p = model_density(kernel, d)?;
        let (tri_mean, wedge_mean) = motif_means(kernel, d, p)?;
        let tri_theory = MotifTheory::triangle(n, tri_mean);
        let wedge_theory = MotifTheory::wedge(n, wedge_mean);
        Ok(DetectionCell {
            kernel: kernel.clone(),
            n,
            d,
            p,
            alpha,
            mode,
            triangle: (tri_theory, make_test(&tri_theory, alpha)?),
            wedge: (wedge_theory, make_test(&wedge_theory, alpha)?),
        })
    }

    pub fn test(&self, motif: Motif) -> &ZTest {
        match motif {
            Motif::Triangle => &self.triangle.1,
            Motif::Wedge => &self.wedge.1,
        }
    }

    /// One RGG draw and one matched ER draw.
    pub fn run_trial(&self, trial: usize, trial_seed: u64) -> Result<TrialStats> {
        let g = sample_model(&self.kernel, self.n, self.d, trial_seed)?;
        let null = sample_er(self.n, self.p, substream(trial_seed, 2))?;
        let (rgg, p_rgg) = standardized_counts(&g, self.p, self.mode)?;
        let (er, p_er) = standardized_counts(&null, self.p, self.mode)?;
        Ok(TrialStats {
            trial,
            seed: trial_seed,
            rgg,
            er,
            p_rgg,
            p_er,
        })
    }

    pub fn report(&self, stats: Vec<TrialStats>) -> PowerReport {
        let trials = stats.len();
        let summarize = |(theory, test): (MotifTheory, ZTest), pick: fn(&SignedCounts) -> f64| {
            let hits = stats
                .iter()
                .filter(|s| test.apply(pick(&s.rgg)).decision == Decision::Rgg)
                .count();
            let false_hits = stats
                .iter()
                .filter(|s| test.apply(pick(&s.er)).decision == Decision::Rgg)
                .count();
            MotifSummary {
                theory,
                test,
                power: proportion(hits, trials),
                fpr: proportion(false_hits, trials),
            }
        };
        PowerReport {
            n: self.n,
            d: self.d,
            p: self.p,
            alpha: self.alpha,
            triangle: summarize(self.triangle, |c| c.triangle),
            wedge: summarize(self.wedge, |c| c.wedge),
            trials: stats,
        }
    }
}

/// Dimensions predicted for the detection and estimation thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedThresholds {
    /// Root of `n^3 tr(kappa^3)^2 = 1` in `d`.
    pub d_test: f64,
    /// `b_1` evaluated at `d_test`.
    pub b1: f64,
    /// `b_1^{3/2} n^{3/4}`, when `b_1 != 0`.
    pub d_test_linear: Option<f64>,
    /// `b_1 n^{1/2}`, when `b_1 != 0`.
    pub d_est: Option<f64>,
    /// First degree with a non-negligible eigenvalue.
    pub k0: usize,
    /// Self-consistent `b_{k0}(d)^{3/(2 k0)} n^{3/(4 k0)}`.
    pub d_test_general: f64,
}

fn spectrum_at(kernel: &KernelSpec, d: f64) -> Result<KernelSpectrum> {
    kernel_spectrum(&standardize(kernel, d)?)
}

fn crossing_gap(kernel: &KernelSpec, n: f64, d: f64) -> Result<f64> {
    let tr3 = trace_power(&spectrum_at(kernel, d)?, 3)?.value;
    if tr3 == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(3.0 * n.ln() + 2.0 * tr3.abs().ln())
}

/// Leading degree whose share of `||kappa||^2` exceeds this fraction.
const K0_SHARE: f64 = 1e-12;

pub fn predicted_thresholds(kernel: &KernelSpec, n: usize) -> Result<PredictedThresholds> {
    if n < 3 {
        return Err(invalid(format!("need n >= 3, got {n}")));
    }
    let nf = n as f64;
    let (mut lo, mut hi) = (SEARCH_MIN_D.ln(), SEARCH_MAX_D.ln());
    let g_lo = crossing_gap(kernel, nf, lo.exp())?;
    let g_hi = crossing_gap(kernel, nf, hi.exp())?;
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::NoCrossing(format!(
            "n^3 tr(kappa^3)^2 - 1 does not change sign on [{SEARCH_MIN_D}, {SEARCH_MAX_D}] for {kernel} at n = {n}"
        )));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if crossing_gap(kernel, nf, mid.exp())? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d_test = (0.5 * (lo + hi)).exp();
    let spec = spectrum_at(kernel, d_test)?;
    let b1 = spec.scaled_eigenvalue(1);
    let k0 = spec
        .entries
        .iter()
        .skip(1)
        .find(|e| e.weighted_power(2) > K0_SHARE * spec.norm_sq)
        .map(|e| e.k)
        .ok_or_else(|| Error::NoCrossing(format!("{kernel} has no non-constant spectral component")))?;
    let (d_test_linear, d_est) = if k0 == 1 {
        (Some(b1.abs().powf(1.5) * nf.powf(0.75)), Some(b1.abs() * nf.sqrt()))
    } else {
        (None, None)
    };
    let kf = k0 as f64;
    let mut d = d_test;
    for _ in 0..100 {
        let bk = spectrum_at(kernel, d)?.scaled_eigenvalue(k0).abs();
        let next = (bk.powf(3.0 / (2.0 * kf)) * nf.powf(3.0 / (4.0 * kf))).max(SEARCH_MIN_D);
        let done = (next - d).abs() <= 1e-10 * d;
        d = next;
        if done {
            break;
        }
    }
    Ok(PredictedThresholds {
        d_test,
        b1,
        d_test_linear,
        d_est,
        k0,
        d_test_general: d,
    })
}

/// `T` and `W` of a graph, through the dense standardized matrix.
pub fn dense_counts(g: &Graph, p: f64) -> Result<SignedCounts> {
    let abar = standardize_adjacency(g, p)?;
    Ok(SignedCounts {
        triangle: signed_triangle_count(&abar),
        wedge: signed_wedge_count(&abar),
    })
}
