//! Helpers shared by the acceptance checks.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

/// One measured check inside a criterion.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    /// A check that could not run at all.
    pub fn error(name: impl Into<String>, err: impl fmt::Display) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

/// Outcome of one numbered criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub label: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "    [{}] {}: {}", if c.pass { "ok" } else { "fail" }, c.name, c.detail)?;
        }
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        write!(
            f,
            "{} {} ({:.0} s){}",
            if self.pass() { "PASS" } else { "FAIL" },
            self.label,
            self.seconds,
            if failed.is_empty() {
                String::new()
            } else {
                format!(" failing: {}", failed.join(", "))
            }
        )
    }
}

/// Runs a criterion, timing it and printing its report as soon as it ends.
pub fn run(label: &str, body: impl FnOnce() -> Vec<Check>) -> Outcome {
    let start = Instant::now();
    let checks = body();
    let outcome = Outcome {
        label: label.to_string(),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    };
    println!("{outcome}");
    outcome
}

/// Adjacent pairs `(i, i+1)` where a curve that should be non-decreasing
/// drops by more than `k` combined standard errors.
pub fn monotone_violations(means: &[f64], ses: &[f64], k: f64) -> Vec<usize> {
    (0..means.len().saturating_sub(1))
        .filter(|&i| {
            let se = (ses[i] * ses[i] + ses[i + 1] * ses[i + 1]).sqrt();
            means[i + 1] < means[i] - k * se
        })
        .collect()
}

/// Vertex pairs of the complete graph on four vertices.
pub const PAIRS4: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let Some(d) = 6usize.checked_sub(a + b + c).filter(|&d| d < 4) else {
                    continue;
                };
                let p = [a, b, c, d];
                let mut seen = [false; 4];
                if p.iter().all(|&x| !std::mem::replace(&mut seen[x], true)) {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn pair_slot(i: usize, j: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    PAIRS4.iter().position(|&q| q == (i, j)).unwrap()
}

/// Isomorphism classes of loopless multigraphs on at most four vertices with
/// at most `max_edges` edges, as multiplicities over [`PAIRS4`]. Graphs on
/// fewer vertices appear with isolated vertices.
pub fn multigraph_classes(max_edges: usize) -> Vec<[usize; 6]> {
    let perms = permutations4();
    let mut classes = BTreeSet::new();
    let mut m = [0usize; 6];
    loop {
        if m.iter().sum::<usize>() <= max_edges {
            let canon = perms
                .iter()
                .map(|p| {
                    let mut out = [0usize; 6];
                    for (slot, &(i, j)) in PAIRS4.iter().enumerate() {
                        out[pair_slot(p[i], p[j])] = m[slot];
                    }
                    out
                })
                .min()
                .unwrap();
            classes.insert(canon);
        }
        let mut k = 0;
        while k < 6 {
            m[k] += 1;
            if m[k] <= max_edges {
                break;
            }
            m[k] = 0;
            k += 1;
        }
        if k == 6 {
            break;
        }
    }
    classes.into_iter().collect()
}
