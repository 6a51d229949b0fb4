//! Distance kernels over Gaussian latent points and their exact subgraph
//! moments through Laplacian spectra.

use std::fmt;

use faer::{Mat, Side};

use crate::detection::{power_experiment, PowerReport, TrialStats};
use crate::error::{invalid, Error, Result};
use crate::graph::ModelKernel;
use crate::kernels::Call;
use crate::numeric::{binomial, MeanSe};

/// `gamma * exp(-beta/2 * |x - y|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceKernelSpec {
    gamma: f64,
    beta: f64,
}

impl DistanceKernelSpec {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidKernel(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidKernel(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { gamma, beta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eval_sq_dist(&self, sq: f64) -> f64 {
        self.gamma * (-0.5 * self.beta * sq).exp()
    }

    /// Edge density for `x_i ~ N(0, I/d)`: `gamma (1 + 2 beta/d)^(-d/2)`.
    pub fn edge_density(&self, d: f64) -> f64 {
        self.gamma * (-0.5 * d * (2.0 * self.beta / d).ln_1p()).exp()
    }

    pub(crate) fn from_call(call: &Call) -> Result<Self> {
        call.expect_keys(&["gamma", "beta"])?;
        Self::new(call.number("gamma")?, call.number("beta")?).map_err(|e| Error::Parse {
            line: 1,
            column: call.name_column,
            message: e.to_string(),
        })
    }
}

impl fmt::Display for DistanceKernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "distance(gamma={:?},beta={:?})", self.gamma, self.beta)
    }
}

impl std::str::FromStr for DistanceKernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let call = crate::kernels::parse_call(s)?;
        if call.name != "distance" {
            return Err(Error::Parse {
                line: 1,
                column: call.name_column,
                message: format!("expected `distance`, found `{}`", call.name),
            });
        }
        Self::from_call(&call)
    }
}

/// Largest vertex count of a [`SimpleSubgraph`].
pub const MAX_SUBGRAPH_VERTICES: usize = 12;
/// Largest edge count for inclusion-exclusion.
pub const MAX_SIGNED_EDGES: usize = 16;

/// A small simple graph with its Laplacian spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleSubgraph {
    v: usize,
    edges: Vec<(usize, usize)>,
    laplacian: Vec<f64>,
}

impl SimpleSubgraph {
    pub fn new(v: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if v == 0 || v > MAX_SUBGRAPH_VERTICES {
            return Err(Error::SizeLimit(format!(
                "subgraphs need 1..={MAX_SUBGRAPH_VERTICES} vertices, got {v}"
            )));
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= v || b >= v {
                return Err(invalid(format!("edge ({a}, {b}) out of range for {v} vertices")));
            }
            if a == b {
                return Err(invalid(format!("self-loop at {a}")));
            }
            let e = (a.min(b), a.max(b));
            if norm.contains(&e) {
                return Err(invalid(format!("duplicate edge ({a}, {b})")));
            }
            norm.push(e);
        }
        let laplacian = laplacian_spectrum(v, &norm)?;
        Ok(Self {
            v,
            edges: norm,
            laplacian,
        })
    }

    pub fn path(k: usize) -> Result<Self> {
        let edges: Vec<_> = (1..k).map(|i| (i - 1, i)).collect();
        Self::new(k, &edges)
    }

    pub fn cycle(k: usize) -> Result<Self> {
        let mut edges: Vec<_> = (1..k).map(|i| (i - 1, i)).collect();
        edges.push((k - 1, 0));
        Self::new(k, &edges)
    }

    pub fn edge() -> Self {
        Self::path(2).expect("valid")
    }

    pub fn wedge() -> Self {
        Self::path(3).expect("valid")
    }

    pub fn triangle() -> Self {
        Self::cycle(3).expect("valid")
    }

    pub fn vertex_count(&self) -> usize {
        self.v
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Laplacian eigenvalues in nondecreasing order.
    pub fn laplacian_eigenvalues(&self) -> &[f64] {
        &self.laplacian
    }
}

fn laplacian_spectrum(v: usize, edges: &[(usize, usize)]) -> Result<Vec<f64>> {
    let mut l = Mat::<f64>::zeros(v, v);
    for &(a, b) in edges {
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
        l[(a, b)] -= 1.0;
        l[(b, a)] -= 1.0;
    }
    let evd = l
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    Ok((0..v).map(|i| s[i].max(0.0)).collect())
}

/// `sum_i -(d/2) log(1 + beta lambda_i / d)`.
fn log_laplace(lambdas: &[f64], beta: f64, d: f64) -> f64 {
    lambdas.iter().map(|&l| -0.5 * d * (beta * l / d).ln_1p()).sum()
}

/// `E prod_{e in H} A_e = gamma^|E| prod_i (1 + beta lambda_i / d)^(-d/2)`
/// for latent points `N(0, I/d)`.
pub fn laplacian_subgraph_expectation(h: &SimpleSubgraph, gamma: f64, beta: f64, d: f64) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(invalid(format!("d must be at least 1, got {d}")));
    }
    let e = h.edges.len() as f64;
    Ok((e * gamma.ln() + log_laplace(&h.laplacian, beta, d)).exp())
}

/// `E prod_{e in H} (A_e - p)` by inclusion-exclusion over edge subsets,
/// exact at every `d`.
pub fn signed_subgraph_expectation(h: &SimpleSubgraph, gamma: f64, beta: f64, d: f64) -> Result<f64> {
    let m = h.edges.len();
    if m > MAX_SIGNED_EDGES {
        return Err(Error::SizeLimit(format!(
            "inclusion-exclusion over {m} edges exceeds {MAX_SIGNED_EDGES}"
        )));
    }
    if !(d >= 1.0) {
        return Err(invalid(format!("d must be at least 1, got {d}")));
    }
    if m == 0 {
        return Ok(1.0);
    }
    // E prod_F A = p^|F| exp(s_F) with s_F small, and the alternating sum of
    // p^|H| over subsets vanishes, so summing expm1(s_F) avoids cancellation
    let log_edge = -0.5 * d * (2.0 * beta / d).ln_1p();
    let p = DistanceKernelSpec::new(gamma, beta)?.edge_density(d);
    let mut terms = Vec::with_capacity(1 << m);
    for mask in 0u32..(1u32 << m) {
        let f: Vec<(usize, usize)> = (0..m).filter(|&k| mask >> k & 1 == 1).map(|k| h.edges[k]).collect();
        let lambdas = laplacian_spectrum(h.v, &f)?;
        let s = log_laplace(&lambdas, beta, d) - f.len() as f64 * log_edge;
        let sign = if (m - f.len()) % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(sign * s.exp_m1());
    }
    Ok(p.powi(m as i32) * crate::numeric::sorted_sum(&terms))
}

/// Wedge and triangle counts on the `A - p` scale against their exact means.
#[derive(Debug, Clone, PartialEq)]
pub struct WedgeExperiment {
    pub p: f64,
    /// Empirical `sum over wedges of (A_ij - p)(A_ik - p)` under the RGG.
    pub wedge: MeanSe,
    /// `3 C(n, 3)` times the exact signed wedge expectation.
    pub wedge_theory: f64,
    /// The same sum under the matched Erdos-Renyi graph.
    pub wedge_null: MeanSe,
    pub triangle: MeanSe,
    pub triangle_theory: f64,
    pub report: PowerReport,
}

/// Samples distance-kernel RGGs over Gaussian clouds and compares the wedge
/// and triangle statistics.
pub fn wedge_nonuniversality_experiment(
    gamma: f64,
    beta: f64,
    n: usize,
    d: usize,
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Result<WedgeExperiment> {
    let k = DistanceKernelSpec::new(gamma, beta)?;
    let report = power_experiment(&ModelKernel::Distance(k), n, d, trials, alpha, seed)?;
    let p = report.p;
    let v = p * (1.0 - p);
    let collect = |f: &dyn Fn(&TrialStats) -> f64| MeanSe::of(&report.trials.iter().map(f).collect::<Vec<_>>());
    let wedge = collect(&|t| t.rgg.wedge * v);
    let wedge_null = collect(&|t| t.er.wedge * v);
    let triangle = collect(&|t| t.rgg.triangle * v.powf(1.5));
    let c3 = binomial(n, 3);
    let df = d as f64;
    Ok(WedgeExperiment {
        p,
        wedge,
        wedge_theory: 3.0 * c3 * signed_subgraph_expectation(&SimpleSubgraph::wedge(), gamma, beta, df)?,
        wedge_null,
        triangle,
        triangle_theory: c3 * signed_subgraph_expectation(&SimpleSubgraph::triangle(), gamma, beta, df)?,
        report,
    })
}
