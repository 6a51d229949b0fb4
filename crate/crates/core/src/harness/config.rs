//! Experiment configuration files.
//!
//! The format is line oriented. `#` starts a comment, blank lines are
//! ignored, `[name]` opens a section and every other line is `key = value`.
//!
//! ```text
//! [experiment]
//! kind = detect            # gen | spectrum | detect | recover | posterior | distance | sweep
//! kernel = gauss_cdf(r=1)  # kernel string, including distance(gamma=..,beta=..)
//! seed = 42                # required
//! trials = 200
//! alpha = 0.01
//! target = detect          # sweep only: the per-cell experiment
//! density = analytic       # analytic | empirical
//! ensemble = 100000        # posterior draws per graph
//! functional = eta         # posterior: eta | overlap
//!
//! [grid]
//! n = 128, 256
//! d = 4, 8, 16             # or geometric(start=4, stop=4096, ratio=2)
//!
//! [run]
//! out = results            # optional output directory
//! workers = 1
//! timeout = 600            # seconds per cell
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::detection::DensityMode;
use crate::graph::ModelKernel;
use crate::kernels::parse_call;
use crate::posterior::PairFunctional;

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_ENSEMBLE: usize = 100_000;
pub const DEFAULT_WORKERS: usize = 1;
pub const DEFAULT_TIMEOUT_SECS: f64 = 600.0;
/// Largest grid a geometric spec may expand to.
pub const MAX_GRID: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentKind {
    Gen,
    Spectrum,
    Detect,
    Recover,
    Posterior,
    Distance,
    Sweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Gen,
        ExperimentKind::Spectrum,
        ExperimentKind::Detect,
        ExperimentKind::Recover,
        ExperimentKind::Posterior,
        ExperimentKind::Distance,
        ExperimentKind::Sweep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Gen => "gen",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Detect => "detect",
            ExperimentKind::Recover => "recover",
            ExperimentKind::Posterior => "posterior",
            ExperimentKind::Distance => "distance",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Per-cell experiment of a sweep. Equal to `kind` otherwise.
    pub target: ExperimentKind,
    pub kernel: ModelKernel,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub trials: usize,
    pub alpha: f64,
    pub seed: u64,
    pub density: DensityMode,
    pub ensemble: usize,
    pub functional: PairFunctional,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub timeout_secs: f64,
}

/// One problem in a config file. Line 0 refers to the file as a whole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// Every problem found in a config file, in line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const KEYS: &[(&str, &[&str])] = &[
    (
        "experiment",
        &["kind", "kernel", "seed", "trials", "alpha", "target", "density", "ensemble", "functional"],
    ),
    ("grid", &["n", "d"]),
    ("run", &["out", "workers", "timeout"]),
];

#[derive(Default)]
struct Raw {
    kind: Option<(ExperimentKind, usize)>,
    target: Option<(ExperimentKind, usize)>,
    kernel: Option<ModelKernel>,
    seed: Option<u64>,
    trials: Option<usize>,
    alpha: Option<f64>,
    density: Option<DensityMode>,
    ensemble: Option<usize>,
    functional: Option<PairFunctional>,
    n: Option<Vec<usize>>,
    d: Option<Vec<usize>>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    timeout: Option<f64>,
}

/// Parses and validates a config, reporting every error found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let mut raw = Raw::default();
    let mut section: Option<&str> = None;
    let mut seen: Vec<(String, String)> = Vec::new();
    let mut key_lines: Vec<(&str, usize)> = Vec::new();

    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let body = full.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut err = |message: String| errors.push(ConfigError { line, message });
        if let Some(rest) = body.strip_prefix('[') {
            match rest.strip_suffix(']').map(str::trim) {
                Some(name) => match KEYS.iter().find(|(s, _)| *s == name) {
                    Some((s, _)) => section = Some(s),
                    None => {
                        err(format!("unknown section `[{name}]`"));
                        section = None;
                    }
                },
                None => err(format!("malformed section header `{body}`")),
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            err(format!("expected `key = value`, found `{body}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section else {
            err(format!("key `{key}` appears outside a known section"));
            continue;
        };
        let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        let Some(&key) = allowed.iter().find(|k| **k == key) else {
            err(format!("unknown key `{key}` in [{sec}] (expected one of {})", allowed.join(", ")));
            continue;
        };
        if seen.iter().any(|(s, k)| s == sec && k == key) {
            err(format!("key `{key}` given twice in [{sec}]"));
            continue;
        }
        seen.push((sec.to_string(), key.to_string()));
        key_lines.push((key, line));
        if let Err(message) = assign(&mut raw, key, value, line) {
            err(message);
        }
    }

    let line_of = |key: &str| key_lines.iter().find(|(k, _)| *k == key).map(|(_, l)| *l).unwrap_or(0);
    let missing = |key: &str, errors: &mut Vec<ConfigError>| {
        errors.push(ConfigError {
            line: 0,
            message: format!("missing required key `{key}`"),
        })
    };
    if raw.kind.is_none() && !key_lines.iter().any(|(k, _)| *k == "kind") {
        missing("kind", &mut errors);
    }
    if raw.kernel.is_none() && !key_lines.iter().any(|(k, _)| *k == "kernel") {
        missing("kernel", &mut errors);
    }
    if raw.seed.is_none() && !key_lines.iter().any(|(k, _)| *k == "seed") {
        missing("seed", &mut errors);
    }
    if raw.n.is_none() && !key_lines.iter().any(|(k, _)| *k == "n") {
        missing("n", &mut errors);
    }
    if raw.d.is_none() && !key_lines.iter().any(|(k, _)| *k == "d") {
        missing("d", &mut errors);
    }

    if let Some((kind, line)) = raw.kind {
        let target = match (kind, raw.target) {
            (ExperimentKind::Sweep, Some((t, tl))) => {
                if matches!(t, ExperimentKind::Sweep | ExperimentKind::Gen) {
                    errors.push(ConfigError {
                        line: tl,
                        message: format!("a sweep cannot target `{t}`"),
                    });
                }
                t
            }
            (ExperimentKind::Sweep, None) => ExperimentKind::Detect,
            (_, Some((_, tl))) => {
                errors.push(ConfigError {
                    line: tl,
                    message: "`target` only applies to kind = sweep".into(),
                });
                kind
            }
            (_, None) => kind,
        };
        if let Some(kernel) = &raw.kernel {
            let kl = line_of("kernel");
            let distance = matches!(kernel, ModelKernel::Distance(_));
            match target {
                ExperimentKind::Distance if !distance => errors.push(ConfigError {
                    line: kl,
                    message: "kind `distance` needs a distance(...) kernel".into(),
                }),
                ExperimentKind::Spectrum | ExperimentKind::Recover | ExperimentKind::Posterior if distance => {
                    errors.push(ConfigError {
                        line: kl,
                        message: format!("kind `{target}` needs an inner-product kernel"),
                    })
                }
                _ => {}
            }
        }
        raw.target = Some((target, line));
    }

    errors.sort_by_key(|e| e.line);
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    let (kind, _) = raw.kind.expect("checked above");
    Ok(ExperimentConfig {
        kind,
        target: raw.target.map(|t| t.0).unwrap_or(kind),
        kernel: raw.kernel.expect("checked above"),
        n: raw.n.expect("checked above"),
        d: raw.d.expect("checked above"),
        trials: raw.trials.unwrap_or(DEFAULT_TRIALS),
        alpha: raw.alpha.unwrap_or(DEFAULT_ALPHA),
        seed: raw.seed.expect("checked above"),
        density: raw.density.unwrap_or_default(),
        ensemble: raw.ensemble.unwrap_or(DEFAULT_ENSEMBLE),
        functional: raw.functional.unwrap_or(PairFunctional::Eta),
        out: raw.out,
        workers: raw.workers.unwrap_or(DEFAULT_WORKERS),
        timeout_secs: raw.timeout.unwrap_or(DEFAULT_TIMEOUT_SECS),
    })
}

fn assign(raw: &mut Raw, key: &str, value: &str, line: usize) -> Result<(), String> {
    match key {
        "kind" => raw.kind = Some((value.parse()?, line)),
        "target" => raw.target = Some((value.parse()?, line)),
        "kernel" => {
            raw.kernel = Some(
                value
                    .parse::<ModelKernel>()
                    .map_err(|e| format!("bad kernel `{value}`: {e}"))?,
            )
        }
        "seed" => raw.seed = Some(parse_u64(value)?),
        "trials" => raw.trials = Some(positive(value, "trials")?),
        "alpha" => {
            let a: f64 = value.parse().map_err(|_| format!("`alpha` must be a number, got `{value}`"))?;
            if !(a > 0.0 && a <= 0.5) {
                return Err(format!("`alpha` must lie in (0, 0.5], got {a}"));
            }
            raw.alpha = Some(a);
        }
        "density" => {
            raw.density = Some(match value {
                "analytic" => DensityMode::Analytic,
                "empirical" => DensityMode::Empirical,
                _ => return Err(format!("`density` must be analytic or empirical, got `{value}`")),
            })
        }
        "ensemble" => raw.ensemble = Some(positive(value, "ensemble")?),
        "functional" => {
            raw.functional = Some(match value {
                "eta" => PairFunctional::Eta,
                "overlap" => PairFunctional::Overlap,
                _ => return Err(format!("`functional` must be eta or overlap, got `{value}`")),
            })
        }
        "n" => {
            let n = parse_list(value, "n")?;
            if let Some(bad) = n.iter().find(|&&x| x < 2) {
                return Err(format!("every n must be at least 2, got {bad}"));
            }
            raw.n = Some(n);
        }
        "d" => {
            raw.d = Some(if value.starts_with("geometric") {
                parse_geometric(value)?
            } else {
                parse_list(value, "d")?
            })
        }
        "out" => {
            let v = value.trim_matches('"');
            if v.is_empty() {
                return Err("`out` is empty".into());
            }
            raw.out = Some(PathBuf::from(v));
        }
        "workers" => raw.workers = Some(positive(value, "workers")?),
        "timeout" => {
            let t: f64 = value.parse().map_err(|_| format!("`timeout` must be a number, got `{value}`"))?;
            if !(t > 0.0 && t.is_finite()) {
                return Err(format!("`timeout` must be positive, got {t}"));
            }
            raw.timeout = Some(t);
        }
        _ => unreachable!("keys are checked against the table"),
    }
    Ok(())
}

fn parse_u64(value: &str) -> Result<u64, String> {
    let parsed = match value.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => value.parse(),
    };
    parsed.map_err(|_| format!("`seed` must be an unsigned 64-bit integer, got `{value}`"))
}

fn positive(value: &str, key: &str) -> Result<usize, String> {
    match value.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("`{key}` must be a positive integer, got `{value}`")),
    }
}

fn parse_list(value: &str, key: &str) -> Result<Vec<usize>, String> {
    let items: Vec<usize> = value
        .split(',')
        .map(|s| positive(s.trim(), key))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(format!("`{key}` is empty"));
    }
    let mut sorted = items.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != items.len() {
        return Err(format!("`{key}` lists a value twice"));
    }
    Ok(items)
}

/// `geometric(start=a, stop=b, ratio=r)`: `a, a r, a r^2, ...` up to `b`,
/// rounded to integers with repeats dropped.
pub fn parse_geometric(value: &str) -> Result<Vec<usize>, String> {
    let call = parse_call(value).map_err(|e| e.to_string())?;
    if call.name != "geometric" {
        return Err(format!("expected geometric(...), found `{}`", call.name));
    }
    call.expect_keys(&["start", "stop", "ratio"]).map_err(|e| e.to_string())?;
    let get = |k: &str| call.number(k).map_err(|e| e.to_string());
    let (start, stop, ratio) = (get("start")?, get("stop")?, get("ratio")?);
    if !(start >= 1.0 && stop >= start && ratio > 1.0) {
        return Err(format!(
            "geometric grid needs 1 <= start <= stop and ratio > 1, got start={start}, stop={stop}, ratio={ratio}"
        ));
    }
    let mut out: Vec<usize> = Vec::new();
    let mut k = 0i32;
    loop {
        let x = start * ratio.powi(k);
        if x > stop * (1.0 + 1e-12) {
            break;
        }
        let v = x.round() as usize;
        if out.last() != Some(&v) {
            out.push(v);
        }
        if out.len() > MAX_GRID {
            return Err(format!("geometric grid has more than {MAX_GRID} points"));
        }
        k += 1;
    }
    Ok(out)
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Writes the config back in the file format. Parsing the output gives the
/// same config.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[experiment]")?;
        writeln!(f, "kind = {}", self.kind)?;
        if self.kind == ExperimentKind::Sweep {
            writeln!(f, "target = {}", self.target)?;
        }
        writeln!(f, "kernel = {}", self.kernel)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "trials = {}", self.trials)?;
        writeln!(f, "alpha = {:?}", self.alpha)?;
        let density = match self.density {
            DensityMode::Analytic => "analytic",
            DensityMode::Empirical => "empirical",
        };
        writeln!(f, "density = {density}")?;
        writeln!(f, "ensemble = {}", self.ensemble)?;
        let functional = match self.functional {
            PairFunctional::Eta => "eta",
            PairFunctional::Overlap => "overlap",
        };
        writeln!(f, "functional = {functional}")?;
        writeln!(f)?;
        writeln!(f, "[grid]")?;
        writeln!(f, "n = {}", join(&self.n))?;
        writeln!(f, "d = {}", join(&self.d))?;
        writeln!(f)?;
        writeln!(f, "[run]")?;
        if let Some(out) = &self.out {
            writeln!(f, "out = {}", out.display())?;
        }
        writeln!(f, "workers = {}", self.workers)?;
        writeln!(f, "timeout = {:?}", self.timeout_secs)
    }
}
