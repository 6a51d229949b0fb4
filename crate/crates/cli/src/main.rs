//! `rgglab <subcommand> --config FILE [--out DIR] [--workers N] [--seed S]`
//!
//! Exit codes: 0 on success, 1 for a bad config or command line, 2 when any
//! cell recorded an error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rgglab::harness::{self, emit_csv, parse_config, run_sweep, ExperimentKind};

#[derive(Parser)]
#[command(name = "rgglab", version, about = "Random geometric graph experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample graphs and write them as edge lists and bit-packed files.
    Gen(RunArgs),
    /// Kernel spectra, trace powers and predicted thresholds.
    Spectrum(RunArgs),
    /// Signed triangle and wedge tests against matched Erdos-Renyi graphs.
    Detect(RunArgs),
    /// Spectral recovery of the latent Gram matrix.
    Recover(RunArgs),
    /// Importance-sampled posterior moments at small n.
    Posterior(RunArgs),
    /// Distance-kernel graphs on Gaussian points.
    Distance(RunArgs),
    /// A grid of another experiment plus crossing-exponent fits.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory. Without one, results CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::Gen(a) => (ExperimentKind::Gen, a),
            Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
            Command::Detect(a) => (ExperimentKind::Detect, a),
            Command::Recover(a) => (ExperimentKind::Recover, a),
            Command::Posterior(a) => (ExperimentKind::Posterior, a),
            Command::Distance(a) => (ExperimentKind::Distance, a),
            Command::Sweep(a) => (ExperimentKind::Sweep, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (kind, args) = cli.command.split();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            eprintln!("error: invalid config {}", args.config.display());
            for e in &errors.0 {
                eprintln!("  {e}");
            }
            return ExitCode::from(1);
        }
    };
    if cfg.kind != kind {
        eprintln!("error: config kind is `{}` but the subcommand is `{kind}`", cfg.kind);
        return ExitCode::from(1);
    }
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    if let Some(w) = args.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        cfg.workers = w;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }

    let output = match run_sweep(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match &cfg.out {
        Some(dir) => match harness::write_outputs(dir, &cfg, &output) {
            Ok(paths) => eprintln!("wrote {} files to {}", paths.len(), dir.display()),
            Err(e) => {
                eprintln!("error: writing {}: {e}", dir.display());
                return ExitCode::from(2);
            }
        },
        None => match emit_csv(&output.records) {
            Ok(text) => {
                let _ = std::io::stdout().write_all(text.as_bytes());
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    }
    for (level, fit) in &output.fits {
        match fit {
            Ok(f) => eprintln!(
                "level {level}: exponent {:.4} (95% CI {:.4} to {:.4}) from n = {:?}",
                f.exponent,
                f.ci.lo,
                f.ci.hi,
                f.crossings.iter().map(|c| c.0).collect::<Vec<_>>()
            ),
            Err(e) => eprintln!("level {level}: no fit: {e}"),
        }
    }
    let failures = output.failures();
    if failures > 0 {
        eprintln!("{failures} rows recorded errors");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
