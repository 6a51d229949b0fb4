//! Threshold crossings per `n` and the exponent of `d_hat(n)` in `n`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::detection::Decision;
use crate::error::{invalid, Error, Result};
use crate::harness::{ExperimentKind, ExperimentRecord};
use crate::rng::stream_rng;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const CI_LEVEL: f64 = 0.95;
/// Levels reported alongside the main fit.
pub const SENSITIVITY_LEVELS: [f64; 3] = [0.3, 0.5, 0.8];

/// Which way the curve runs in `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Power: high at small `d`.
    Decreasing,
    /// Recovery error: low at small `d`.
    Increasing,
}

/// Per-trial values of one curve at fixed `n`, grouped by `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSamples {
    pub n: usize,
    pub points: Vec<(usize, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdFit {
    pub level: f64,
    /// `(n, d_hat)` for every `n` whose curve brackets the level.
    pub crossings: Vec<(usize, f64)>,
    /// `n` values without a bracket.
    pub excluded: Vec<usize>,
    pub exponent: f64,
    pub intercept: f64,
    pub ci: ConfidenceInterval,
    /// Bootstrap resamples that produced a fit.
    pub resamples: usize,
}

/// Weighted pool-adjacent-violators: the non-decreasing sequence closest to
/// `values` in weighted least squares.
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // Blocks of (mean, weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m1, w1, l1) = blocks[blocks.len() - 1];
            let (m0, w0, l0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((m0 * w0 + m1 * w1) / (w0 + w1), w0 + w1, l0 + l1));
        }
    }
    blocks.into_iter().flat_map(|(m, _, l)| std::iter::repeat_n(m, l)).collect()
}

/// First crossing of `level` by the isotonic fit of `means`, interpolated
/// linearly in `log d`. `None` unless the fit starts strictly on one side
/// and ends strictly on the other.
pub fn monotone_crossing(ds: &[f64], means: &[f64], weights: &[f64], level: f64, dir: Direction) -> Option<f64> {
    let sign = match dir {
        Direction::Increasing => 1.0,
        Direction::Decreasing => -1.0,
    };
    let flipped: Vec<f64> = means.iter().map(|m| sign * m).collect();
    let fit = isotonic_increasing(&flipped, weights);
    let level = sign * level;
    if fit.first()? >= &level || fit.last()? <= &level {
        return None;
    }
    let i = fit.iter().position(|&f| f >= level)?;
    let (f0, f1) = (fit[i - 1], fit[i]);
    let t = (level - f0) / (f1 - f0);
    let (l0, l1) = (ds[i - 1].ln(), ds[i].ln());
    Some((l0 + t * (l1 - l0)).exp())
}

fn curve_crossing(curve: &CurveSamples, level: f64, dir: Direction) -> Option<f64> {
    let ds: Vec<f64> = curve.points.iter().map(|(d, _)| *d as f64).collect();
    let means: Vec<f64> = curve
        .points
        .iter()
        .map(|(_, v)| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let weights: Vec<f64> = curve.points.iter().map(|(_, v)| v.len() as f64).collect();
    monotone_crossing(&ds, &means, &weights, level, dir)
}

/// Least-squares `(slope, intercept)` of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn exponent_of(crossings: &[(usize, f64)]) -> (f64, f64) {
    let x: Vec<f64> = crossings.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let y: Vec<f64> = crossings.iter().map(|(_, d)| d.ln()).collect();
    least_squares(&x, &y)
}

/// Crossing per `n`, exponent by least squares of `log d_hat` on `log n`,
/// and a percentile bootstrap CI from resampling trials within each cell.
pub fn fit_threshold(curves: &[CurveSamples], level: f64, dir: Direction, seed: u64) -> Result<ThresholdFit> {
    for c in curves {
        if c.points.windows(2).any(|w| w[0].0 >= w[1].0) || c.points.iter().any(|(d, v)| *d == 0 || v.is_empty()) {
            return Err(invalid(format!("curve at n = {} needs increasing d with samples at each", c.n)));
        }
    }
    let mut crossings = Vec::new();
    let mut excluded = Vec::new();
    let mut usable = Vec::new();
    for c in curves {
        match curve_crossing(c, level, dir) {
            Some(d) => {
                crossings.push((c.n, d));
                usable.push(c);
            }
            None => excluded.push(c.n),
        }
    }
    if crossings.len() < 3 {
        return Err(Error::NoCrossing(format!(
            "{} of {} n values bracket the level {level}; at least 3 are needed (excluded: {excluded:?})",
            crossings.len(),
            curves.len()
        )));
    }
    let (exponent, intercept) = exponent_of(&crossings);

    let mut rng = stream_rng(seed, 0);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut boot = Vec::with_capacity(usable.len());
        for c in &usable {
            let resampled = CurveSamples {
                n: c.n,
                points: c
                    .points
                    .iter()
                    .map(|(d, v)| (*d, (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).collect()))
                    .collect(),
            };
            if let Some(d) = curve_crossing(&resampled, level, dir) {
                boot.push((c.n, d));
            }
        }
        if boot.len() >= 3 {
            slopes.push(exponent_of(&boot).0);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let (lo, hi) = if slopes.is_empty() {
        (exponent, exponent)
    } else {
        let q = |p: f64| slopes[((p * (slopes.len() - 1) as f64).round() as usize).min(slopes.len() - 1)];
        let tail = (1.0 - CI_LEVEL) / 2.0;
        // Percentile intervals can miss a skewed point estimate; widen to it.
        (q(tail).min(exponent), q(1.0 - tail).max(exponent))
    };
    Ok(ThresholdFit {
        level,
        crossings,
        excluded,
        exponent,
        intercept,
        ci: ConfidenceInterval { level: CI_LEVEL, lo, hi },
        resamples: slopes.len(),
    })
}

/// The per-trial statistic a sweep of `kind` is fitted on, and its direction.
pub fn fit_statistic(kind: ExperimentKind) -> Option<(&'static str, Direction)> {
    match kind {
        ExperimentKind::Detect => Some(("triangle_rgg", Direction::Decreasing)),
        ExperimentKind::Distance => Some(("wedge_rgg", Direction::Decreasing)),
        ExperimentKind::Recover => Some(("relative_mse", Direction::Increasing)),
        _ => None,
    }
}

/// Groups trial rows of `statistic` into curves per `(kernel, n)`. Rows with
/// a decision count as 1 for `rgg` and 0 for `er`; others use their value.
pub fn curves_from_records(records: &[ExperimentRecord], kind: ExperimentKind, statistic: &str) -> Vec<CurveSamples> {
    let mut grouped: BTreeMap<usize, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in records {
        if r.kind != kind || r.statistic != statistic || r.trial.is_none() || r.error.is_some() {
            continue;
        }
        let v = match (r.decision, r.value) {
            (Some(dec), _) => f64::from(u8::from(dec == Decision::Rgg)),
            (None, Some(v)) => v,
            (None, None) => continue,
        };
        grouped.entry(r.n).or_default().entry(r.d).or_default().push(v);
    }
    grouped
        .into_iter()
        .map(|(n, by_d)| CurveSamples {
            n,
            points: by_d.into_iter().collect(),
        })
        .collect()
}

/// Fits the crossing exponent of a sweep's records at `level`.
pub fn fit_records(records: &[ExperimentRecord], kind: ExperimentKind, level: f64, seed: u64) -> Result<ThresholdFit> {
    let (statistic, dir) =
        fit_statistic(kind).ok_or_else(|| invalid(format!("no threshold statistic for `{kind}` records")))?;
    fit_threshold(&curves_from_records(records, kind, statistic), level, dir, seed)
}
