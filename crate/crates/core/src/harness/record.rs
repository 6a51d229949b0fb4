//! The results CSV.
//!
//! Columns, in order: `kind, kernel, n, d, trial, seed, statistic, value,
//! decision, error`. `trial` and `seed` are empty on per-cell summary rows,
//! `value` is empty on error rows, `decision` is `rgg`, `er` or empty.
//! Floats are written as `{:.16e}` (17 significant digits) so they parse
//! back to the same bits. Rows are sorted by `(kind, kernel, n, d, trial,
//! statistic)` with summary rows after the trials of their cell.

use std::cmp::Ordering;
use std::io::{Read, Write};

use crate::detection::Decision;
use crate::error::{parse_error, Result};
use crate::harness::ExperimentKind;

pub const HEADER: [&str; 10] = [
    "kind",
    "kernel",
    "n",
    "d",
    "trial",
    "seed",
    "statistic",
    "value",
    "decision",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub kind: ExperimentKind,
    pub kernel: String,
    pub n: usize,
    pub d: usize,
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub statistic: String,
    pub value: Option<f64>,
    pub decision: Option<Decision>,
    pub error: Option<String>,
}

impl ExperimentRecord {
    /// Sort key. Summary rows (`trial = None`) follow the trial rows.
    fn key(&self) -> (ExperimentKind, &str, usize, usize, (bool, usize), &str) {
        (
            self.kind,
            &self.kernel,
            self.n,
            self.d,
            (self.trial.is_none(), self.trial.unwrap_or(0)),
            &self.statistic,
        )
    }

    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Wall-clock time of one cell. Kept out of the results CSV so that file is
/// a pure function of the config.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTiming {
    pub kind: ExperimentKind,
    pub kernel: String,
    pub n: usize,
    pub d: usize,
    pub seconds: f64,
}

pub fn sort_records(records: &mut [ExperimentRecord]) {
    records.sort_by(|a, b| a.canonical_cmp(b));
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes records in the order given.
pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            r.kind.as_str().to_string(),
            r.kernel.clone(),
            r.n.to_string(),
            r.d.to_string(),
            r.trial.map(|t| t.to_string()).unwrap_or_default(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.statistic.clone(),
            r.value.map(format_float).unwrap_or_default(),
            r.decision.map(|d| d.as_str().to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Records as CSV text.
pub fn emit_csv(records: &[ExperimentRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = rd.records();
    let header = match rows.next() {
        Some(h) => h?,
        None => return Err(parse_error(1, 1, "empty results file")),
    };
    if header.iter().ne(HEADER) {
        return Err(parse_error(1, 1, format!("expected header `{}`", HEADER.join(","))));
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.len() != HEADER.len() {
            return Err(parse_error(line, 1, format!("expected {} fields, got {}", HEADER.len(), row.len())));
        }
        let field = |i: usize| &row[i];
        let bad = |i: usize, what: &str| parse_error(line, i + 1, format!("`{}` is not {what}", field(i)));
        let opt = |i: usize| (!field(i).is_empty()).then(|| field(i).to_string());
        let kind = field(0).parse::<ExperimentKind>().map_err(|_| bad(0, "an experiment kind"))?;
        let n = field(2).parse().map_err(|_| bad(2, "an integer"))?;
        let d = field(3).parse().map_err(|_| bad(3, "an integer"))?;
        let trial = opt(4).map(|s| s.parse()).transpose().map_err(|_| bad(4, "an integer"))?;
        let seed = opt(5).map(|s| s.parse()).transpose().map_err(|_| bad(5, "an integer"))?;
        let value = opt(7).map(|s| s.parse::<f64>()).transpose().map_err(|_| bad(7, "a number"))?;
        let decision = opt(8).map(|s| s.parse()).transpose().map_err(|_| bad(8, "a decision"))?;
        out.push(ExperimentRecord {
            kind,
            kernel: field(1).to_string(),
            n,
            d,
            trial,
            seed,
            statistic: field(6).to_string(),
            value,
            decision,
            error: opt(9),
        });
    }
    Ok(out)
}

/// Parses CSV text produced by [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ExperimentRecord>> {
    read_records(text.as_bytes())
}

pub fn write_timings<W: Write>(out: W, timings: &[CellTiming]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "kernel", "n", "d", "seconds"])?;
    for t in timings {
        w.write_record([
            t.kind.as_str().to_string(),
            t.kernel.clone(),
            t.n.to_string(),
            t.d.to_string(),
            format!("{:.6}", t.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}
