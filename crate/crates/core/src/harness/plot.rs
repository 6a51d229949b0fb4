//! SVG line charts of per-cell summaries against `d`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::harness::{ExperimentKind, ExperimentRecord};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// File written when there is nothing to plot.
pub const EMPTY_PLOT: &str = "no_data.svg";

/// Summary statistics drawn for each kind, with the y-axis label.
pub fn plotted_statistics(kind: ExperimentKind) -> (&'static [&'static str], &'static str) {
    match kind {
        ExperimentKind::Detect | ExperimentKind::Distance => (&["triangle_power", "wedge_power"], "power"),
        ExperimentKind::Recover => (&["relative_mse_mean"], "relative MSE"),
        ExperimentKind::Posterior => (&["squared_mean_mean"], "squared posterior mean"),
        _ => (&[], ""),
    }
}

/// File-name-safe form of a kernel string.
pub fn kernel_slug(kernel: &str) -> String {
    kernel
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

pub fn plot_file_name(kind: ExperimentKind, kernel: &str, n: usize) -> String {
    format!("{kind}_{}_n{n}.svg", kernel_slug(kernel))
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

/// Writes one chart per `(kind, kernel, n)` into `dir` and returns the paths.
/// With nothing plottable, writes a single empty chart instead.
pub fn emit_plots(records: &[ExperimentRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut charts: BTreeMap<(ExperimentKind, &str, usize), BTreeMap<&str, Vec<(f64, f64)>>> = BTreeMap::new();
    for r in records {
        let (stats, _) = plotted_statistics(r.kind);
        if r.trial.is_some() || !stats.contains(&r.statistic.as_str()) {
            continue;
        }
        if let Some(v) = r.value.filter(|v| v.is_finite()) {
            charts
                .entry((r.kind, &r.kernel, r.n))
                .or_default()
                .entry(&r.statistic)
                .or_default()
                .push((r.d as f64, v));
        }
    }
    let mut paths = Vec::new();
    if charts.is_empty() {
        let path = dir.join(EMPTY_PLOT);
        std::fs::write(&path, render("no results", "d", "value", &[]))?;
        paths.push(path);
        return Ok(paths);
    }
    for ((kind, kernel, n), by_stat) in charts {
        let series: Vec<Series> = by_stat
            .into_iter()
            .map(|(name, mut points)| {
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                Series {
                    name: name.to_string(),
                    points,
                }
            })
            .collect();
        let title = format!("{kind} {kernel}, n = {n}");
        let path = dir.join(plot_file_name(kind, kernel, n));
        std::fs::write(&path, render(&title, "d", plotted_statistics(kind).1, &series))?;
        paths.push(path);
    }
    Ok(paths)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(x: f64) -> String {
    if x != 0.0 && (x.abs() >= 1e4 || x.abs() < 1e-2) {
        format!("{x:.1e}")
    } else if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.2}")
    }
}

fn render(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y_min, y_max) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let log_x = x0 > 0.0 && x1 / x0 > 10.0;
    if !x0.is_finite() {
        (x0, x1) = (1.0, 10.0);
    }
    if x1 <= x0 {
        (x0, x1) = (x0 * 0.5, x1 * 1.5 + 1.0);
    }
    let y0 = if y_min.is_finite() { y_min.min(0.0) } else { 0.0 };
    let mut y1 = if y_max.is_finite() { y_max.max(1.0) } else { 1.0 };
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let fx = |x: f64| {
        let t = if log_x { (x / x0).ln() / (x1 / x0).ln() } else { (x - x0) / (x1 - x0) };
        LEFT + t * pw
    };
    let fy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{0}" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = if log_x { x0 * (x1 / x0).powf(t) } else { x0 + t * (x1 - x0) };
        let yv = y0 + t * (y1 - y0);
        let (px, py) = (fx(xv), fy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{0}" x2="{px:.2}" y2="{1}" stroke="black"/><text x="{px:.2}" y="{2}" text-anchor="middle">{3}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{1}" y="{2:.2}" text-anchor="end">{3}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let xl = if log_x { format!("{xlabel} (log scale)") } else { xlabel.to_string() };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&xl)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(ylabel)
    );
    if series.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="16" fill="gray">no data</text>"#,
            LEFT + pw / 2.0,
            TOP + ph / 2.0
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", fx(x), fy(y)))
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        for &(x, y) in &ser.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                fx(x),
                fy(y)
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{0}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{1}" y="{2}">{3}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}
