//! Executes a config's grid.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::detection::{predicted_thresholds, sample_model, DensityMode, DetectionCell, Motif, TrialStats};
use crate::distance::{signed_subgraph_expectation, SimpleSubgraph};
use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, ModelKernel};
use crate::harness::fit::{fit_records, fit_statistic, ThresholdFit, SENSITIVITY_LEVELS};
use crate::harness::record::{sort_records, CellTiming, ExperimentRecord};
use crate::harness::seed::{seed_base, trial_seed};
use crate::harness::{ExperimentConfig, ExperimentKind};
use crate::kernels::{edge_density, standardize};
use crate::numeric::{binomial, MeanSe};
use crate::posterior::{PosteriorCell, MIN_TRUSTED_ESS};
use crate::recovery::recovery_replicate;
use crate::rng::fmix64;
use crate::spectra::{kernel_spectrum, trace_power};

/// Trials started between deadline checks.
pub const TRIAL_CHUNK: usize = 16;

/// A graph from a `gen` run.
#[derive(Debug, Clone)]
pub struct GeneratedGraph {
    pub n: usize,
    pub d: usize,
    pub trial: usize,
    pub seed: u64,
    pub graph: Graph,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// Sorted canonically.
    pub records: Vec<ExperimentRecord>,
    pub timings: Vec<CellTiming>,
    /// Crossing fits at each sensitivity level, for sweeps of fittable kinds.
    pub fits: Vec<(f64, std::result::Result<ThresholdFit, String>)>,
    pub graphs: Vec<GeneratedGraph>,
}

impl SweepOutput {
    /// Rows carrying an error.
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

struct CellResult {
    records: Vec<ExperimentRecord>,
    graphs: Vec<GeneratedGraph>,
    seconds: f64,
}

/// Shared fields of every row in a cell.
struct RowMaker<'a> {
    kind: ExperimentKind,
    kernel: &'a str,
    n: usize,
    d: usize,
}

impl RowMaker<'_> {
    fn row(&self, trial: Option<(usize, u64)>, statistic: &str, value: f64) -> ExperimentRecord {
        ExperimentRecord {
            kind: self.kind,
            kernel: self.kernel.to_string(),
            n: self.n,
            d: self.d,
            trial: trial.map(|t| t.0),
            seed: trial.map(|t| t.1),
            statistic: statistic.to_string(),
            value: Some(value),
            decision: None,
            error: None,
        }
    }

    fn error(&self, trial: Option<(usize, u64)>, statistic: &str, err: impl ToString) -> ExperimentRecord {
        ExperimentRecord {
            value: None,
            error: Some(err.to_string()),
            ..self.row(trial, statistic, 0.0)
        }
    }
}

/// Runs every `(n, d)` cell of the config on `cfg.workers` threads.
///
/// Cells and trials are scheduled on a work-stealing pool, but all
/// randomness is derived from the config before any work starts and rows are
/// sorted before they are returned, so the output does not depend on the
/// number of workers. A cell that fails records an error row and the run
/// continues; a cell that runs past the timeout keeps its finished trials and
/// records a `timeout` row.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| invalid(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let cells: Vec<(usize, usize)> = cfg.n.iter().flat_map(|&n| cfg.d.iter().map(move |&d| (n, d))).collect();
    let kernel = cfg.kernel.to_string();
    let kind = cfg.target;
    let base = seed_base(cfg.seed, kind.as_str(), &kernel);
    let timeout = Duration::from_secs_f64(cfg.timeout_secs);

    let results: Vec<CellResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, d)| {
                let start = Instant::now();
                let rows = RowMaker {
                    kind,
                    kernel: &kernel,
                    n,
                    d,
                };
                let mut graphs = Vec::new();
                let records = run_cell(cfg, &rows, base, start + timeout, &mut graphs);
                CellResult {
                    records,
                    graphs,
                    seconds: start.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut timings = Vec::new();
    let mut graphs = Vec::new();
    for (&(n, d), r) in cells.iter().zip(results) {
        records.extend(r.records);
        graphs.extend(r.graphs);
        timings.push(CellTiming {
            kind,
            kernel: kernel.clone(),
            n,
            d,
            seconds: r.seconds,
        });
    }
    sort_records(&mut records);

    let mut fits = Vec::new();
    if cfg.kind == ExperimentKind::Sweep && fit_statistic(kind).is_some() {
        for level in SENSITIVITY_LEVELS {
            let fit = fit_records(&records, kind, level, fmix64(cfg.seed ^ level.to_bits()));
            fits.push((level, fit.map_err(|e| e.to_string())));
        }
    }
    Ok(SweepOutput {
        records,
        timings,
        fits,
        graphs,
    })
}

fn run_cell(
    cfg: &ExperimentConfig,
    rows: &RowMaker<'_>,
    base: u64,
    deadline: Instant,
    graphs: &mut Vec<GeneratedGraph>,
) -> Vec<ExperimentRecord> {
    let mut out = Vec::new();
    let result = match rows.kind {
        ExperimentKind::Spectrum => spectrum_cell(cfg, rows, &mut out),
        ExperimentKind::Gen => gen_cell(cfg, rows, base, deadline, &mut out, graphs),
        ExperimentKind::Detect | ExperimentKind::Distance => detect_cell(cfg, rows, base, deadline, &mut out),
        ExperimentKind::Recover => recover_cell(cfg, rows, base, deadline, &mut out),
        ExperimentKind::Posterior => posterior_cell(cfg, rows, base, deadline, &mut out),
        ExperimentKind::Sweep => Err(invalid("a sweep cell cannot itself be a sweep")),
    };
    if let Err(e) = result {
        let statistic = if matches!(e, Error::Timeout(_)) { "timeout" } else { "error" };
        out.push(rows.error(None, statistic, e));
    }
    out
}

/// Runs `trials` in chunks, checking the deadline between chunks.
fn chunked_trials<T: Send>(
    cfg: &ExperimentConfig,
    rows: &RowMaker<'_>,
    base: u64,
    deadline: Instant,
    trial: impl Fn(usize, u64) -> Result<T> + Sync,
    mut sink: impl FnMut(usize, u64, Result<T>),
) -> Result<()> {
    let mut done = 0;
    while done < cfg.trials {
        if Instant::now() > deadline {
            return Err(Error::Timeout(format!(
                "cell exceeded {} s after {done} of {} trials",
                cfg.timeout_secs, cfg.trials
            )));
        }
        let end = (done + TRIAL_CHUNK).min(cfg.trials);
        let seeds = (done..end)
            .map(|t| trial_seed(base, rows.n, rows.d, t).map(|s| (t, s)))
            .collect::<Result<Vec<_>>>()?;
        let results: Vec<_> = seeds.par_iter().map(|&(t, s)| (t, s, trial(t, s))).collect();
        for (t, s, r) in results {
            sink(t, s, r);
        }
        done = end;
    }
    Ok(())
}

fn detect_cell(
    cfg: &ExperimentConfig,
    rows: &RowMaker<'_>,
    base: u64,
    deadline: Instant,
    out: &mut Vec<ExperimentRecord>,
) -> Result<()> {
    let cell = DetectionCell::new(&cfg.kernel, rows.n, rows.d, cfg.alpha, cfg.density)?;
    let mut stats: Vec<TrialStats> = Vec::with_capacity(cfg.trials);
    chunked_trials(
        cfg,
        rows,
        base,
        deadline,
        |t, s| cell.run_trial(t, s),
        |t, s, r| match r {
            Ok(st) => {
                for motif in [Motif::Triangle, Motif::Wedge] {
                    let test = cell.test(motif);
                    let pick = |c: &crate::detection::SignedCounts| match motif {
                        Motif::Triangle => c.triangle,
                        Motif::Wedge => c.wedge,
                    };
                    for (side, counts) in [("rgg", &st.rgg), ("er", &st.er)] {
                        let v = pick(counts);
                        let mut row = rows.row(Some((t, s)), &format!("{}_{side}", motif.as_str()), v);
                        row.decision = Some(test.apply(v).decision);
                        out.push(row);
                    }
                }
                if cfg.density == DensityMode::Empirical {
                    out.push(rows.row(Some((t, s)), "density_rgg", st.p_rgg));
                    out.push(rows.row(Some((t, s)), "density_er", st.p_er));
                }
                stats.push(st);
            }
            Err(e) => out.push(rows.error(Some((t, s)), "error", e)),
        },
    )?;
    if stats.is_empty() {
        return Ok(());
    }
    let v = cell.p * (1.0 - cell.p);
    let report = cell.report(stats);
    out.push(rows.row(None, "edge_density", report.p));
    out.push(rows.row(None, "z_alpha", cell.triangle.1.z_alpha));
    for motif in [Motif::Triangle, Motif::Wedge] {
        let s = report.summary(motif);
        let name = motif.as_str();
        out.push(rows.row(None, &format!("{name}_mean_theory"), s.theory.mean_p));
        out.push(rows.row(None, &format!("{name}_threshold"), s.test.threshold));
        out.push(rows.row(None, &format!("{name}_power"), s.power.mean));
        out.push(rows.row(None, &format!("{name}_power_se"), s.power.se));
        out.push(rows.row(None, &format!("{name}_fpr"), s.fpr.mean));
    }
    if let (ExperimentKind::Distance, ModelKernel::Distance(k)) = (rows.kind, &cfg.kernel) {
        // Raw scale: sums of (A_ij - p) products.
        let (n, df) = (rows.n, rows.d as f64);
        let c3 = binomial(n, 3);
        let raw = |f: &dyn Fn(&TrialStats) -> f64| MeanSe::of(&report.trials.iter().map(f).collect::<Vec<_>>());
        let wedge = raw(&|t| t.rgg.wedge * v);
        let tri = raw(&|t| t.rgg.triangle * v.powf(1.5));
        let w_theory = 3.0 * c3 * signed_subgraph_expectation(&SimpleSubgraph::wedge(), k.gamma(), k.beta(), df)?;
        let t_theory = c3 * signed_subgraph_expectation(&SimpleSubgraph::triangle(), k.gamma(), k.beta(), df)?;
        out.push(rows.row(None, "wedge_raw_mean", wedge.mean));
        out.push(rows.row(None, "wedge_raw_se", wedge.se));
        out.push(rows.row(None, "wedge_raw_theory", w_theory));
        out.push(rows.row(None, "triangle_raw_mean", tri.mean));
        out.push(rows.row(None, "triangle_raw_se", tri.se));
        out.push(rows.row(None, "triangle_raw_theory", t_theory));
    }
    Ok(())
}

fn recover_cell(
    cfg: &ExperimentConfig,
    rows: &RowMaker<'_>,
    base: u64,
    deadline: Instant,
    out: &mut Vec<ExperimentRecord>,
) -> Result<()> {
    let mut mses = Vec::with_capacity(cfg.trials);
    chunked_trials(
        cfg,
        rows,
        base,
        deadline,
        |t, s| recovery_replicate(&cfg.kernel, rows.n, rows.d, t, s),
        |t, s, r| match r {
            Ok(rt) => {
                out.push(rows.row(Some((t, s)), "relative_mse", rt.relative_mse));
                out.push(rows.row(Some((t, s)), "gap_d", rt.gap.gap_d));
                out.push(rows.row(Some((t, s)), "gap_d1", rt.gap.gap_d1));
                mses.push(rt.relative_mse);
            }
            Err(e) => out.push(rows.error(Some((t, s)), "error", e)),
        },
    )?;
    if !mses.is_empty() {
        let ms = MeanSe::of(&mses);
        out.push(rows.row(None, "relative_mse_mean", ms.mean));
        out.push(rows.row(None, "relative_mse_se", ms.se));
    }
    Ok(())
}

fn posterior_cell(
    cfg: &ExperimentConfig,
    rows: &RowMaker<'_>,
    base: u64,
    deadline: Instant,
    out: &mut Vec<ExperimentRecord>,
) -> Result<()> {
    let ModelKernel::InnerProduct(k) = &cfg.kernel else {
        return Err(invalid("posterior runs need an inner-product kernel"));
    };
    let cell = PosteriorCell::new(k, cfg.functional, rows.n, rows.d, cfg.ensemble)?;
    let mut values = Vec::with_capacity(cfg.trials);
    let mut trusted = true;
    chunked_trials(
        cfg,
        rows,
        base,
        deadline,
        |t, s| cell.run_replicate(t, s),
        |t, s, r| match r {
            Ok(v) => {
                out.push(rows.row(Some((t, s)), "squared_mean", v.value));
                out.push(rows.row(Some((t, s)), "ess", v.ess));
                trusted &= v.ess >= MIN_TRUSTED_ESS;
                values.push(v.value);
            }
            Err(e) => out.push(rows.error(Some((t, s)), "error", e)),
        },
    )?;
    if !values.is_empty() {
        let ms = MeanSe::of(&values);
        out.push(rows.row(None, "squared_mean_mean", ms.mean));
        out.push(rows.row(None, "squared_mean_se", ms.se));
        out.push(rows.row(None, "trusted", f64::from(u8::from(trusted))));
    }
    Ok(())
}

fn gen_cell(
    cfg: &ExperimentConfig,
    rows: &RowMaker<'_>,
    base: u64,
    deadline: Instant,
    out: &mut Vec<ExperimentRecord>,
    graphs: &mut Vec<GeneratedGraph>,
) -> Result<()> {
    chunked_trials(
        cfg,
        rows,
        base,
        deadline,
        |_, s| sample_model(&cfg.kernel, rows.n, rows.d, s),
        |t, s, r| match r {
            Ok(g) => {
                out.push(rows.row(Some((t, s)), "edges", g.edge_count() as f64));
                out.push(rows.row(Some((t, s)), "density", g.density()));
                graphs.push(GeneratedGraph {
                    n: rows.n,
                    d: rows.d,
                    trial: t,
                    seed: s,
                    graph: g,
                });
            }
            Err(e) => out.push(rows.error(Some((t, s)), "error", e)),
        },
    )?;
    if let Ok(p) = crate::detection::model_density(&cfg.kernel, rows.d) {
        out.push(rows.row(None, "edge_density", p));
    }
    Ok(())
}

/// Spectrum of the standardized kernel at `d` plus predicted thresholds at
/// `n`. No randomness.
fn spectrum_cell(cfg: &ExperimentConfig, rows: &RowMaker<'_>, out: &mut Vec<ExperimentRecord>) -> Result<()> {
    let ModelKernel::InnerProduct(k) = &cfg.kernel else {
        return Err(invalid("spectra need an inner-product kernel"));
    };
    let d = rows.d as f64;
    out.push(rows.row(None, "edge_density", edge_density(k, d)?));
    let spec = kernel_spectrum(&standardize(k, d)?)?;
    for e in &spec.entries {
        out.push(rows.row(None, &format!("lambda_{:03}", e.k), e.eigenvalue));
        out.push(rows.row(None, &format!("b_{:03}", e.k), spec.scaled_eigenvalue(e.k)));
        out.push(rows.row(None, &format!("ln_multiplicity_{:03}", e.k), e.ln_multiplicity));
    }
    for m in 2..=4 {
        out.push(rows.row(None, &format!("tr{m}"), trace_power(&spec, m)?.value));
    }
    match predicted_thresholds(k, rows.n) {
        Ok(t) => {
            out.push(rows.row(None, "b1", t.b1));
            out.push(rows.row(None, "d_test", t.d_test));
            out.push(rows.row(None, "d_test_general", t.d_test_general));
            out.push(rows.row(None, "k0", t.k0 as f64));
            if let Some(v) = t.d_test_linear {
                out.push(rows.row(None, "d_test_linear", v));
            }
            if let Some(v) = t.d_est {
                out.push(rows.row(None, "d_est", v));
            }
        }
        Err(e) => out.push(rows.error(None, "d_test", e)),
    }
    Ok(())
}
