//! Spectral estimation of the latent Gram matrix.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use rayon::prelude::*;

use crate::detection::model_density;
use crate::error::{invalid, Error, Result};
use crate::geometry::{gram_matrix, sample_sphere_points, DiagMode, GramMatrix, PointCloud};
use crate::graph::{sample_rgg, standardize_adjacency, ModelKernel, StandardizedAdjacency};
use crate::numeric::{compensated_sum, MeanSe};
use crate::rng::substream;

/// Smallest trial count accepted by [`recovery_sweep`].
pub const MIN_TRIALS: usize = 10;

/// Level whose crossing defines the recovery threshold.
pub const MSE_LEVEL: f64 = 0.5;

/// Eigenvalues of `abar` on either side of the cut at `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapDiagnostics {
    /// `d`-th largest `|eigenvalue|`.
    pub gap_d: f64,
    /// `(d+1)`-th largest `|eigenvalue|`.
    pub gap_d1: f64,
}

impl GapDiagnostics {
    pub fn ratio(&self) -> f64 {
        self.gap_d / self.gap_d1
    }
}

#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub d: usize,
    /// `(n/d) U U^T`, diagonal included.
    pub estimate: Mat<f64>,
    /// The `d` eigenvectors kept, one per column.
    pub vectors: Mat<f64>,
    /// Every eigenvalue of `abar`, by decreasing absolute value.
    pub spectrum: Vec<f64>,
    pub gap: GapDiagnostics,
}

impl SpectralEstimate {
    /// The estimate with its diagonal set to zero.
    pub fn zero_diagonal(&self) -> Mat<f64> {
        let mut m = self.estimate.clone();
        for i in 0..m.nrows() {
            m[(i, i)] = 0.0;
        }
        m
    }
}

/// Keeps the `d` eigenvectors of `abar` with the largest `|eigenvalue|`.
pub fn spectral_recover(abar: &StandardizedAdjacency, d: usize) -> Result<SpectralEstimate> {
    let n = abar.n();
    if d == 0 || d >= n {
        return Err(invalid(format!("need 1 <= d < n, got d = {d}, n = {n}")));
    }
    let eig = abar
        .as_mat()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = eig.S().column_vector();
    let vecs = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    let spectrum: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let u = Mat::from_fn(n, d, |i, j| vecs[(i, order[j])]);
    let mut estimate = Mat::<f64>::zeros(n, n);
    matmul(estimate.as_mut(), Accum::Replace, u.as_ref(), u.transpose(), n as f64 / d as f64, Par::Seq);
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (estimate[(i, j)] + estimate[(j, i)]);
            estimate[(i, j)] = v;
            estimate[(j, i)] = v;
        }
    }
    let gap = GapDiagnostics {
        gap_d: spectrum[d - 1].abs(),
        gap_d1: spectrum[d].abs(),
    };
    Ok(SpectralEstimate {
        d,
        estimate,
        vectors: u,
        spectrum,
        gap,
    })
}

/// Cut with the largest ratio of consecutive `|eigenvalue|`s among the first
/// `max_d`. A diagnostic for unknown `d`.
pub fn largest_gap_dimension(spectrum: &[f64], max_d: usize) -> Option<usize> {
    (1..=max_d.min(spectrum.len().saturating_sub(1)))
        .map(|k| (k, spectrum[k - 1].abs() / spectrum[k].abs()))
        .filter(|(_, r)| r.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
}

/// Off-diagonal `||estimate - X||_F^2 / (n (n - 1) / d)`.
pub fn relative_mse(estimate: MatRef<'_, f64>, truth: &GramMatrix, d: usize) -> Result<f64> {
    let n = truth.n();
    if estimate.nrows() != n || estimate.ncols() != n {
        return Err(invalid(format!(
            "estimate is {}x{} but the truth is {n}x{n}",
            estimate.nrows(),
            estimate.ncols()
        )));
    }
    if truth.diag_mode() != DiagMode::Zero {
        return Err(invalid("scoring needs a zero-diagonal Gram matrix"));
    }
    if n < 2 || d == 0 {
        return Err(invalid("scoring needs n >= 2 and d >= 1"));
    }
    let x = truth.as_mat();
    let rows = (0..n).map(|j| {
        let mut s = 0.0;
        for i in 0..n {
            if i != j {
                let e = estimate[(i, j)] - x[(i, j)];
                s += e * e;
            }
        }
        s
    });
    Ok(compensated_sum(rows) / (n as f64 * (n as f64 - 1.0) / d as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryTrial {
    pub n: usize,
    pub d: usize,
    pub trial: usize,
    pub seed: u64,
    pub relative_mse: f64,
    pub gap: GapDiagnostics,
}

/// One replicate: sphere cloud, graph, spectral estimate, score.
pub fn recovery_trial(kernel: &ModelKernel, n: usize, d: usize, trial: usize, seed: u64) -> Result<RecoveryTrial> {
    recovery_replicate(kernel, n, d, trial, substream(seed, trial as u64))
}

/// [`recovery_trial`] with the per-trial seed given directly.
pub fn recovery_replicate(
    kernel: &ModelKernel,
    n: usize,
    d: usize,
    trial: usize,
    trial_seed: u64,
) -> Result<RecoveryTrial> {
    let ModelKernel::InnerProduct(_) = kernel else {
        return Err(invalid("recovery is defined for inner-product kernels"));
    };
    let cloud = sample_sphere_points(n, d, substream(trial_seed, 0))?;
    let (relative_mse, gap) = recover_on_cloud(kernel, &cloud, substream(trial_seed, 1))?;
    Ok(RecoveryTrial {
        n,
        d,
        trial,
        seed: trial_seed,
        relative_mse,
        gap,
    })
}

/// Samples a graph on a given cloud, estimates its Gram matrix with the
/// analytic `p`, and scores the estimate.
pub fn recover_on_cloud(kernel: &ModelKernel, cloud: &PointCloud, edge_seed: u64) -> Result<(f64, GapDiagnostics)> {
    let d = cloud.d();
    let p = model_density(kernel, d)?;
    let g = sample_rgg(kernel, cloud, edge_seed)?;
    let abar = standardize_adjacency(&g, p)?;
    let est = spectral_recover(&abar, d)?;
    let truth = gram_matrix(cloud, DiagMode::Zero);
    Ok((relative_mse(est.estimate.as_ref(), &truth, d)?, est.gap))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryPoint {
    pub d: usize,
    pub mse: MeanSe,
    pub trials: Vec<RecoveryTrial>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCurve {
    pub n: usize,
    pub points: Vec<RecoveryPoint>,
    /// First upward crossing of [`MSE_LEVEL`], interpolated in `log d`.
    pub crossing: Option<f64>,
}

/// Linear interpolation in `log d` at the first upward crossing of `level`.
pub fn first_crossing(points: &[(f64, f64)], level: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((d0, m0), (d1, m1)) = (w[0], w[1]);
        if m0 < level && m1 >= level {
            let t = (level - m0) / (m1 - m0);
            Some((d0.ln() + t * (d1.ln() - d0.ln())).exp())
        } else {
            None
        }
    })
}

/// Mean relative MSE against `d` at fixed `n`.
pub fn recovery_sweep(
    kernel: &ModelKernel,
    n: usize,
    d_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<RecoveryCurve> {
    if trials < MIN_TRIALS {
        return Err(invalid(format!("recovery sweeps need at least {MIN_TRIALS} trials, got {trials}")));
    }
    if d_grid.is_empty() || d_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("the d grid must be nonempty and strictly increasing"));
    }
    let mut points = Vec::with_capacity(d_grid.len());
    for &d in d_grid {
        let runs = (0..trials)
            .into_par_iter()
            .map(|t| recovery_trial(kernel, n, d, t, substream(seed, d as u64)))
            .collect::<Result<Vec<_>>>()?;
        let mse = MeanSe::of(&runs.iter().map(|r| r.relative_mse).collect::<Vec<_>>());
        points.push(RecoveryPoint { d, mse, trials: runs });
    }
    let curve: Vec<(f64, f64)> = points.iter().map(|p| (p.d as f64, p.mse.mean)).collect();
    Ok(RecoveryCurve {
        n,
        crossing: first_crossing(&curve, MSE_LEVEL),
        points,
    })
}

#[cfg(test)]
mod tests;
