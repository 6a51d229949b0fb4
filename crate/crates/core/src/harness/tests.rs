use proptest::prelude::*;

use super::fit::{isotonic_increasing, monotone_crossing};
use super::seed::{seed_base, trial_seed};
use super::*;
use crate::detection::{Decision, DensityMode};
use crate::error::Error;
use crate::graph::{decode_bits, encode_bits, ModelKernel};
use crate::kernels::KernelSpec;
use crate::posterior::PairFunctional;

const MINIMAL: &str = "\
[experiment]
kind = detect
kernel = gauss_cdf(r=1)
seed = 7

[grid]
n = 64
d = 8
";

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.kind, ExperimentKind::Detect);
    assert_eq!(cfg.target, ExperimentKind::Detect);
    assert_eq!(cfg.trials, 200);
    assert_eq!(cfg.alpha, 0.01);
    assert_eq!(cfg.workers, 1);
    assert_eq!(cfg.timeout_secs, 600.0);
    assert_eq!(cfg.density, DensityMode::Analytic);
    assert_eq!(cfg.functional, PairFunctional::Eta);
    assert_eq!(cfg.out, None);
}

#[test]
fn missing_seed_is_named() {
    let text = MINIMAL.replace("seed = 7\n", "");
    let err = parse_config(&text).unwrap_err();
    assert_eq!(err.0.len(), 1);
    assert!(err.0[0].message.contains("`seed`"), "{err}");
}

#[test]
fn linear_kernel_string() {
    let text = MINIMAL.replace("gauss_cdf(r=1)", "linear(p=0.3,r=0.05)");
    let cfg = parse_config(&text).unwrap();
    assert_eq!(cfg.kernel, ModelKernel::InnerProduct(KernelSpec::linear(0.3, 0.05).unwrap()));
}

#[test]
fn every_error_is_reported_with_its_line() {
    let text = "\
[experiment]
kind = detect
colour = blue
kernel = gauss_cdf(q=1)
trials = 0

[grid]
n = 64
d = 8
[extra]
";
    let err = parse_config(text).unwrap_err();
    let lines: Vec<usize> = err.0.iter().map(|e| e.line).collect();
    assert_eq!(lines, vec![0, 3, 4, 5, 10], "{err}");
    assert!(err.0[0].message.contains("seed"));
    assert!(err.0[1].message.contains("colour"));
    assert!(err.0[2].message.contains("kernel"));
    assert!(err.to_string().contains("line 4:"));
}

#[test]
fn structural_errors() {
    let cases = [
        ("kind = detect\n", "outside"),
        ("[experiment]\nkind detect\n", "key = value"),
        ("[experiment\n", "malformed"),
        ("[experiment]\nseed = 1\nseed = 2\n", "twice"),
        ("[experiment]\nkind = bogus\n", "unknown experiment kind"),
        ("[experiment]\nalpha = 0.7\n", "alpha"),
        ("[grid]\nd = 4, 4\n", "twice"),
        ("[grid]\nn = 1\n", "at least 2"),
        ("[experiment]\nkind = detect\ntarget = recover\n", "only applies"),
        ("[experiment]\nkind = sweep\ntarget = gen\n", "cannot target"),
        ("[experiment]\nkind = recover\nkernel = distance(gamma=0.5,beta=1)\n", "inner-product"),
        ("[experiment]\nkind = distance\nkernel = gauss_cdf(r=1)\n", "distance(...)"),
    ];
    for (text, needle) in cases {
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains(needle), "{text:?}: {err}");
    }
}

#[test]
fn geometric_grids() {
    assert_eq!(parse_geometric("geometric(start=4, stop=64, ratio=2)").unwrap(), vec![4, 8, 16, 32, 64]);
    let g = parse_geometric("geometric(start=2, stop=20, ratio=1.2)").unwrap();
    assert_eq!(g[0], 2);
    assert!(g.windows(2).all(|w| w[0] < w[1]) && *g.last().unwrap() <= 20);
    assert!(parse_geometric("geometric(start=4, stop=2, ratio=2)").is_err());
    assert!(parse_geometric("geometric(start=4, stop=8)").is_err());
    let text = MINIMAL.replace("d = 8", "d = geometric(start=8, stop=32, ratio=2)");
    assert_eq!(parse_config(&text).unwrap().d, vec![8, 16, 32]);
}

fn kind_strategy() -> impl Strategy<Value = ExperimentKind> {
    prop::sample::select(ExperimentKind::ALL.to_vec())
}

proptest! {
    #[test]
    fn config_display_round_trips(
        kind in prop::sample::select(vec![
            ExperimentKind::Gen, ExperimentKind::Detect, ExperimentKind::Recover, ExperimentKind::Sweep,
        ]),
        n in prop::collection::btree_set(2usize..5000, 1..4),
        d in prop::collection::btree_set(1usize..5000, 1..5),
        trials in 1usize..1000,
        alpha in 0.001f64..0.5,
        seed in any::<u64>(),
        r in 0.1f64..4.0,
        workers in 1usize..8,
        empirical in any::<bool>(),
    ) {
        let cfg = ExperimentConfig {
            kind,
            target: if kind == ExperimentKind::Sweep { ExperimentKind::Recover } else { kind },
            kernel: ModelKernel::InnerProduct(KernelSpec::logistic(r).unwrap()),
            n: n.into_iter().collect(),
            d: d.into_iter().collect(),
            trials,
            alpha,
            seed,
            density: if empirical { DensityMode::Empirical } else { DensityMode::Analytic },
            ensemble: 5000,
            functional: PairFunctional::Overlap,
            out: Some("some/dir".into()),
            workers,
            timeout_secs: 12.5,
        };
        prop_assert_eq!(parse_config(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn csv_round_trips(rows in prop::collection::vec(record_strategy(), 0..40)) {
        let text = emit_csv(&rows).unwrap();
        let back = parse_csv(&text).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!(a.value.map(f64::to_bits), b.value.map(f64::to_bits));
            let mut b = b.clone();
            b.value = a.value;
            prop_assert_eq!(a, &b);
        }
    }

    #[test]
    fn csv_parser_never_panics(text in "\\PC*") {
        let _ = parse_csv(&text);
        let _ = parse_config(&text);
    }
}

fn record_strategy() -> impl Strategy<Value = ExperimentRecord> {
    let value = prop_oneof![
        Just(None),
        any::<f64>().prop_map(Some),
        Just(Some(-0.0)),
        Just(Some(f64::INFINITY)),
        Just(Some(f64::MIN_POSITIVE / 3.0)),
    ];
    let decision = prop_oneof![Just(None), Just(Some(Decision::Rgg)), Just(Some(Decision::Er))];
    (
        kind_strategy(),
        "[a-z_(=,.0-9)\"]{1,30}",
        0usize..100_000,
        0usize..100_000,
        prop::option::of(0usize..1000),
        prop::option::of(any::<u64>()),
        "[a-z_0-9]{1,20}",
        value,
        decision,
        prop::option::of("[ -~\n]{1,40}"),
    )
        .prop_map(|(kind, kernel, n, d, trial, seed, statistic, value, decision, error)| ExperimentRecord {
            kind,
            kernel,
            n,
            d,
            trial,
            seed,
            statistic,
            value,
            decision,
            error,
        })
}

#[test]
fn csv_float_format() {
    let r = ExperimentRecord {
        kind: ExperimentKind::Detect,
        kernel: "linear(p=0.3,r=0.05)".into(),
        n: 3,
        d: 4,
        trial: None,
        seed: None,
        statistic: "x".into(),
        value: Some(0.1),
        decision: None,
        error: None,
    };
    let text = emit_csv(&[r]).unwrap();
    assert_eq!(
        text,
        "kind,kernel,n,d,trial,seed,statistic,value,decision,error\n\
         detect,\"linear(p=0.3,r=0.05)\",3,4,,,x,1.0000000000000001e-1,,\n"
    );
    assert!(parse_csv("kind,kernel\n").is_err());
    assert!(parse_csv("").is_err());
    let bad = text.replace(",3,4,", ",three,4,");
    assert!(matches!(parse_csv(&bad), Err(Error::Parse { line: 2, column: 3, .. })));
}

#[test]
fn seed_collision_scan() {
    let base = seed_base(42, "detect", "gauss_cdf(r=1.0)");
    let mut seeds = Vec::with_capacity(1_000_000);
    for n in 0..100 {
        for d in 0..100 {
            for t in 0..100 {
                seeds.push(trial_seed(base, 2 + 7 * n, 1 + 13 * d, t).unwrap());
            }
        }
    }
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 1_000_000);
    assert!(trial_seed(base, 1 << 24, 1, 0).is_err());
    assert!(trial_seed(base, 2, 1 << 20, 0).is_err());
    assert_ne!(base, seed_base(42, "recover", "gauss_cdf(r=1.0)"));
    assert_ne!(base, seed_base(42, "detect", "gauss_cdf(r=2.0)"));
    assert_ne!(base, seed_base(43, "detect", "gauss_cdf(r=1.0)"));
}

#[test]
fn fnv_reference_values() {
    assert_eq!(seed::fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
    assert_eq!(seed::fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    assert_eq!(seed::fnv1a64(b"foobar"), 0x8594_4171_f739_67e8);
}

#[test]
fn isotonic_regression() {
    assert_eq!(isotonic_increasing(&[1.0, 3.0, 2.0, 4.0], &[1.0; 4]), vec![1.0, 2.5, 2.5, 4.0]);
    assert_eq!(isotonic_increasing(&[3.0, 1.0], &[1.0, 3.0]), vec![1.5, 1.5]);
    let v = [0.5, 0.1, 0.9, 0.3, 0.2, 0.8];
    let fit = isotonic_increasing(&v, &[1.0; 6]);
    assert!(fit.windows(2).all(|w| w[0] <= w[1]));
    assert!((fit.iter().sum::<f64>() - v.iter().sum::<f64>()).abs() < 1e-12);
    let ds = [1.0, 2.0, 4.0, 8.0];
    let c = monotone_crossing(&ds, &[1.0, 0.9, 0.3, 0.0], &[1.0; 4], 0.6, Direction::Decreasing).unwrap();
    assert!((c - 2.0f64.powf(1.5)).abs() < 1e-12);
    assert_eq!(monotone_crossing(&ds, &[0.5; 4], &[1.0; 4], 0.5, Direction::Decreasing), None);
}

fn step_curves(ns: &[usize], trials: usize) -> Vec<CurveSamples> {
    ns.iter()
        .map(|&n| CurveSamples {
            n,
            points: (1..=400)
                .map(|d| {
                    let hit = (d as f64) < (n as f64).powf(0.75);
                    (d, vec![f64::from(u8::from(hit)); trials])
                })
                .collect(),
        })
        .collect()
}

#[test]
fn step_truth_recovers_three_quarters() {
    let fit = fit_threshold(&step_curves(&[128, 256, 512, 1024, 2048], 4), 0.5, Direction::Decreasing, 1).unwrap();
    assert!((fit.exponent - 0.75).abs() < 0.02, "{fit:?}");
    assert!(fit.ci.lo <= fit.exponent && fit.exponent <= fit.ci.hi);
    assert!(fit.excluded.is_empty());
    assert_eq!(fit.resamples, fit::BOOTSTRAP_RESAMPLES);
}

#[test]
fn flat_power_aborts() {
    let flat: Vec<CurveSamples> = [128, 256, 512]
        .iter()
        .map(|&n| CurveSamples {
            n,
            points: (1..=20).map(|d| (d, vec![0.0, 1.0])).collect(),
        })
        .collect();
    let err = fit_threshold(&flat, 0.5, Direction::Decreasing, 1).unwrap_err();
    assert!(matches!(err, Error::NoCrossing(_)), "{err}");
}

#[test]
fn unbracketed_n_is_excluded() {
    let mut curves = step_curves(&[128, 256, 512], 2);
    curves.push(CurveSamples {
        n: 64,
        points: vec![(1, vec![0.0]), (2, vec![0.0])],
    });
    let fit = fit_threshold(&curves, 0.5, Direction::Decreasing, 1).unwrap();
    assert_eq!(fit.excluded, vec![64]);
    assert_eq!(fit.crossings.len(), 3);
    assert!(fit_threshold(&step_curves(&[128, 256], 2), 0.5, Direction::Decreasing, 1).is_err());
}

#[test]
fn noisy_curves_have_ci_around_estimate() {
    // Power 1 - d / (2 n^{1/2}) sampled with 30 Bernoulli trials per cell.
    let mut rng = crate::rng::stream_rng(5, 0);
    use rand::Rng;
    let curves: Vec<CurveSamples> = [100usize, 400, 1600, 6400]
        .iter()
        .map(|&n| CurveSamples {
            n,
            points: (1..=40)
                .map(|k| {
                    let d = 2 * k;
                    let power = (1.0 - d as f64 / (2.0 * (n as f64).sqrt())).clamp(0.0, 1.0);
                    (d, (0..30).map(|_| f64::from(u8::from(rng.random::<f64>() < power))).collect())
                })
                .collect(),
        })
        .collect();
    let fit = fit_threshold(&curves, 0.5, Direction::Decreasing, 9).unwrap();
    assert!(fit.ci.lo <= fit.exponent && fit.exponent <= fit.ci.hi);
    assert!(fit.ci.hi - fit.ci.lo > 0.0);
    assert!((fit.exponent - 0.5).abs() < 0.1, "{fit:?}");
}

fn detect_config(extra_grid: &str) -> ExperimentConfig {
    let text = format!(
        "[experiment]\nkind = detect\nkernel = logistic(r=2)\nseed = 11\ntrials = 40\nalpha = 0.05\n\n[grid]\n{extra_grid}\n"
    );
    parse_config(&text).unwrap()
}

#[test]
fn runs_are_deterministic_and_worker_invariant() {
    let mut cfg = detect_config("n = 20, 30\nd = 3, 5");
    let a = emit_csv(&run_sweep(&cfg).unwrap().records).unwrap();
    let b = emit_csv(&run_sweep(&cfg).unwrap().records).unwrap();
    assert_eq!(a, b);
    cfg.workers = 3;
    let c = emit_csv(&run_sweep(&cfg).unwrap().records).unwrap();
    assert_eq!(a, c);
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.failures(), 0);
    assert_eq!(out.timings.len(), 4);
    // Four statistics per trial, twelve summary rows per cell.
    assert_eq!(out.records.len(), 4 * (40 * 4 + 12));
    let mut keys: Vec<_> = out
        .records
        .iter()
        .map(|r| (r.n, r.d, r.trial, r.statistic.clone()))
        .collect();
    keys.dedup();
    assert_eq!(keys.len(), out.records.len());
}

#[test]
fn one_cell_sweep_matches_single_run() {
    let single = detect_config("n = 25\nd = 4");
    let mut sweep = single.clone();
    sweep.kind = ExperimentKind::Sweep;
    let a = run_sweep(&single).unwrap();
    let b = run_sweep(&sweep).unwrap();
    assert_eq!(a.records, b.records);
    assert!(a.fits.is_empty());
    assert_eq!(b.fits.len(), fit::SENSITIVITY_LEVELS.len());
    assert!(b.fits.iter().all(|(_, f)| f.is_err()));
}

#[test]
fn trial_seeds_follow_the_documented_mix() {
    let cfg = detect_config("n = 20\nd = 3");
    let out = run_sweep(&cfg).unwrap();
    let base = seed_base(11, "detect", &cfg.kernel.to_string());
    for r in out.records.iter().filter(|r| r.trial.is_some()) {
        assert_eq!(r.seed, Some(trial_seed(base, 20, 3, r.trial.unwrap()).unwrap()));
    }
}

#[test]
fn cell_failures_become_rows() {
    let text = "[experiment]\nkind = recover\nkernel = gauss_cdf(r=1)\nseed = 3\ntrials = 3\n[grid]\nn = 12\nd = 2, 12\n";
    let cfg = parse_config(text).unwrap();
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.failures(), 3);
    let good = out.records.iter().filter(|r| r.d == 2 && r.error.is_none()).count();
    assert_eq!(good, 3 * 3 + 2);
    assert!(out
        .records
        .iter()
        .filter(|r| r.d == 12)
        .all(|r| r.error.is_some() && r.value.is_none()));
}

#[test]
fn timeouts_are_recorded() {
    let mut cfg = detect_config("n = 20\nd = 3");
    cfg.timeout_secs = 1e-9;
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.records[0].statistic, "timeout");
    assert!(out.records[0].error.as_ref().unwrap().contains("0 of 40"));
}

#[test]
fn other_kinds_run() {
    let base = "seed = 5\ntrials = 2\nensemble = 400\n[grid]\nn = 4\nd = 3\n";
    for (kind, kernel, stat) in [
        ("spectrum", "logistic(r=2)", "lambda_001"),
        ("gen", "logistic(r=2)", "edges"),
        ("posterior", "linear(p=0.4,r=0.2)", "squared_mean"),
        ("distance", "distance(gamma=0.5,beta=1)", "wedge_raw_theory"),
    ] {
        let text = format!("[experiment]\nkind = {kind}\nkernel = {kernel}\n{base}");
        let out = run_sweep(&parse_config(&text).unwrap()).unwrap();
        assert_eq!(out.failures(), 0, "{kind}: {:?}", out.records);
        assert!(out.records.iter().any(|r| r.statistic == stat), "{kind}");
    }
}

#[test]
fn plots_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = emit_plots(&[], dir.path()).unwrap();
    assert_eq!(empty.len(), 1);
    let svg = std::fs::read_to_string(&empty[0]).unwrap();
    assert!(svg.contains("no data") && svg.contains("<line"));

    let cfg = detect_config("n = 20\nd = 3");
    let out = run_sweep(&cfg).unwrap();
    let paths = emit_plots(&out.records, dir.path()).unwrap();
    assert_eq!(paths.len(), 1);
    assert!(paths[0].ends_with("detect_logistic_r_2.0__n20.svg"));
    let svg = std::fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(svg.matches("<circle").count(), 2);
    assert!(!svg.contains("<polyline"));

    let cfg = detect_config("n = 20, 24\nd = 3, 4");
    let out = run_sweep(&cfg).unwrap();
    let paths = emit_plots(&out.records, dir.path()).unwrap();
    let names: Vec<_> = paths.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
    assert_eq!(names, vec!["detect_logistic_r_2.0__n20.svg", "detect_logistic_r_2.0__n24.svg"]);

    let text = "[experiment]\nkind = gen\nkernel = logistic(r=2)\nseed = 5\ntrials = 2\n[grid]\nn = 9\nd = 3\n";
    let cfg = parse_config(text).unwrap();
    let out = run_sweep(&cfg).unwrap();
    let gen_dir = dir.path().join("gen");
    write_outputs(&gen_dir, &cfg, &out).unwrap();
    let bits = std::fs::read(gen_dir.join("graph_n9_d3_t1.rggb")).unwrap();
    assert_eq!(encode_bits(&decode_bits(&bits).unwrap()), encode_bits(&out.graphs[1].graph));
    let csv_text = std::fs::read_to_string(gen_dir.join(RESULTS_FILE)).unwrap();
    assert_eq!(parse_csv(&csv_text).unwrap(), out.records);
    let meta = std::fs::read_to_string(gen_dir.join(METADATA_FILE)).unwrap();
    let echoed = meta.split("# config as parsed\n").nth(1).unwrap();
    assert_eq!(parse_config(echoed).unwrap(), cfg);
}
