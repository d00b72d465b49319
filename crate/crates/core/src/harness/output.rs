//! CSV logs, aggregate tables, SVG charts and the phase report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::batch::{BatchResult, mean_curve};
use super::phases::PhaseReport;
use super::run::{LogRow, RunLog};
use super::sweep::EtaPoint;
use crate::error::{Error, Result};

pub const RUN_LOG_HEADER: [&str; 14] = [
    "step",
    "state",
    "winner_expert",
    "action",
    "next_state",
    "reward",
    "inference_cost_units",
    "inference_cost_seconds_equiv",
    "H_mb",
    "H_mf",
    "kappa",
    "p_select_mb",
    "p_select_mf",
    "episode_index",
];

pub const AGGREGATE_HEADER: [&str; 7] = [
    "step",
    "cumulative_reward_mean",
    "cumulative_reward_std",
    "cumulative_cost_mean",
    "cumulative_cost_std",
    "p_select_mf_mean",
    "p_select_mf_std",
];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Input(format!("csv output to {}: {other:?}", path.display())),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn row_record(r: &LogRow) -> [String; 14] {
    [
        r.step.to_string(),
        r.state.to_string(),
        r.winner.label().to_string(),
        r.action.to_string(),
        r.next_state.to_string(),
        r.reward.to_string(),
        r.cost_units.to_string(),
        r.cost_seconds.to_string(),
        opt(r.h_mb),
        opt(r.h_mf),
        opt(r.kappa),
        opt(r.p_mb),
        opt(r.p_mf),
        r.episode.to_string(),
    ]
}

/// Serialises a run log as CSV with the 14-column header.
pub fn run_log_csv(log: &RunLog) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RUN_LOG_HEADER).expect("in-memory write");
    for r in &log.rows {
        w.write_record(row_record(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn write_run_log(log: &RunLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(RUN_LOG_HEADER).map_err(|e| csv_err(path, e))?;
    for r in &log.rows {
        w.write_record(row_record(r)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-step mean and population std of a family of curves.
fn mean_std(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mean = mean_curve(curves.iter().cloned());
    let n = curves.len().max(1) as f64;
    let std = (0..mean.len())
        .map(|i| (curves.iter().map(|c| (c[i] - mean[i]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    (mean, std)
}

/// Per-step aggregate of a batch: the three curve families with dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub reward_mean: Vec<f64>,
    pub reward_std: Vec<f64>,
    pub cost_mean: Vec<f64>,
    pub cost_std: Vec<f64>,
    pub p_mf_mean: Option<Vec<f64>>,
    pub p_mf_std: Option<Vec<f64>>,
}

impl CurveSummary {
    pub fn of(batch: &BatchResult) -> Self {
        let rewards: Vec<Vec<f64>> = batch.runs.iter().map(|r| r.cumulative_reward()).collect();
        let costs: Vec<Vec<f64>> = batch.runs.iter().map(|r| r.cumulative_cost_seconds()).collect();
        let p: Option<Vec<Vec<f64>>> = batch.runs.iter().map(|r| r.p_mf_curve()).collect();
        let (reward_mean, reward_std) = mean_std(&rewards);
        let (cost_mean, cost_std) = mean_std(&costs);
        let (p_mf_mean, p_mf_std) = match p {
            Some(p) => {
                let (m, s) = mean_std(&p);
                (Some(m), Some(s))
            }
            None => (None, None),
        };
        CurveSummary {
            reward_mean,
            reward_std,
            cost_mean,
            cost_std,
            p_mf_mean,
            p_mf_std,
        }
    }
}

pub fn aggregate_csv(summary: &CurveSummary) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_HEADER).expect("in-memory write");
    let cell = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|c| c[i].to_string()).unwrap_or_default();
    for i in 0..summary.reward_mean.len() {
        w.write_record([
            i.to_string(),
            summary.reward_mean[i].to_string(),
            summary.reward_std[i].to_string(),
            summary.cost_mean[i].to_string(),
            summary.cost_std[i].to_string(),
            cell(&summary.p_mf_mean, i),
            cell(&summary.p_mf_std, i),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn sweep_csv(points: &[EtaPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eta", "mean_final_reward", "mean_final_cost_units", "mean_final_cost_seconds", "dominated"])
        .expect("in-memory write");
    for p in points {
        w.write_record([
            p.eta.to_string(),
            p.mean_reward.to_string(),
            p.mean_cost_units.to_string(),
            p.mean_cost_seconds.to_string(),
            p.dominated.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// One named polyline.
pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A minimal static line chart. Long series are thinned to at most 800 points.
pub fn line_chart_svg(title: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (w, h, margin) = (720.0, 420.0, 60.0);
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0).max(2);
    let mut y_min = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let mut y_max = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    if !y_min.is_finite() || !y_max.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-12 {
        y_max = y_min + 1.0;
    }
    let x = |i: usize| margin + (w - 2.0 * margin) * i as f64 / (n - 1) as f64;
    let y = |v: f64| h - margin - (h - 2.0 * margin) * (v - y_min) / (y_max - y_min);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{margin}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        h - margin,
        w - margin,
        h - margin
    );
    let _ = writeln!(svg, r#"<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{}" stroke="black"/>"#, h - margin);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">step</text>"#,
        w / 2.0,
        h - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (v, anchor) in [(y_min, h - margin), (y_max, margin)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"#,
            margin - 4.0,
            anchor + 4.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"#,
        w - margin,
        h - margin + 14.0,
        n - 1
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let stride = s.values.len().div_ceil(800).max(1);
        let mut points = String::new();
        for (i, v) in s.values.iter().enumerate() {
            if i % stride == 0 || i + 1 == s.values.len() {
                let _ = write!(points, "{:.2},{:.2} ", x(i), y(*v));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.trim_end()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            margin + 8.0,
            margin + 14.0 * (k + 1) as f64,
            escape(s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes per-run CSVs, aggregate CSVs, the three chart families and the
/// phase report (if any) for a set of batches. Returns the files written.
pub fn emit_outputs(batches: &[BatchResult], phases: Option<&PhaseReport>, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut summaries = Vec::new();
    for b in batches {
        let name = b.agent.name().to_ascii_lowercase();
        for log in &b.runs {
            let path = dir.join(format!("run_{name}_seed{}.csv", log.seed));
            write_run_log(log, &path)?;
            written.push(path);
        }
        let summary = CurveSummary::of(b);
        written.push(write_file(dir.join(format!("aggregate_{name}.csv")), &aggregate_csv(&summary))?);
        summaries.push((b.agent.name(), summary, b.agent.is_coordinated()));
    }

    let reward: Vec<Series> = summaries
        .iter()
        .map(|(label, s, _)| Series { label, values: &s.reward_mean })
        .collect();
    written.push(write_file(
        dir.join("cumulative_reward.svg"),
        &line_chart_svg("Mean cumulative reward", "reward", &reward),
    )?);
    let cost: Vec<Series> = summaries
        .iter()
        .map(|(label, s, _)| Series { label, values: &s.cost_mean })
        .collect();
    written.push(write_file(
        dir.join("cumulative_cost.svg"),
        &line_chart_svg("Mean cumulative inference cost", "seconds-equivalent", &cost),
    )?);
    for (label, s, coordinated) in &summaries {
        if let (true, Some(p_mf)) = (coordinated, &s.p_mf_mean) {
            let p_mb: Vec<f64> = p_mf.iter().map(|p| 1.0 - p).collect();
            let svg = line_chart_svg(
                &format!("Mean expert selection probabilities ({label})"),
                "probability",
                &[Series { label: "MB", values: &p_mb }, Series { label: "MF", values: p_mf }],
            );
            written.push(write_file(
                dir.join(format!("selection_{}.svg", label.to_ascii_lowercase())),
                &svg,
            )?);
        }
    }
    if let Some(report) = phases {
        written.push(write_file(dir.join("phases.txt"), &report.to_string())?);
    }
    Ok(written)
}
