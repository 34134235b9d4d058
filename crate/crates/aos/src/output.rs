//! Result files: per-run records, summary curves, savings, a run manifest
//! and an SVG learning-curve plot.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use aos_core::experiment::{aggregate, compare_savings, CurveSummary, RunEntry, RunRecord, Savings};
use aos_core::StrategyKind;
use serde::{Deserialize, Serialize};

use crate::batch::{BatchOutcome, RunFailure};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SAVINGS_FILE: &str = "savings.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOT_FILE: &str = "learning_curves.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: Software,
    pub problem: String,
    pub dim: usize,
    pub outputs: Vec<String>,
    pub config: ExperimentConfig,
    pub run_seeds: Vec<u64>,
    pub failures: Vec<RunFailure>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, outcome: &BatchOutcome, dim: usize, outputs: Vec<String>) -> Self {
        Manifest {
            software: Software {
                name: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            problem: config.problem_name(),
            dim,
            outputs,
            config: config.clone(),
            run_seeds: outcome.run_seeds.clone(),
            failures: outcome.failures.clone(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::format(&path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, format!("{other:?}")),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn records_header(dim: usize, outputs: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["run", "strategy", "n_meas", "leader"].map(String::from).to_vec();
    h.extend((1..=dim).map(|i| format!("query_x{i}")));
    h.extend(outputs.iter().map(|o| format!("nrmse_{o}")));
    h.push("nrmse_sum".into());
    h.extend(outputs.iter().map(|o| format!("cv_{o}")));
    h.extend(outputs.iter().map(|o| format!("cv_filtered_{o}")));
    h
}

/// One row per record entry. Missing values (no leader, no query, no CV
/// error) are empty cells.
pub fn write_records(path: &Path, records: &[RunRecord], dim: usize, outputs: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(records_header(dim, outputs)).map_err(|e| csv_error(path, e))?;
    let m = outputs.len();
    for r in records {
        for e in &r.entries {
            let mut row = vec![r.run.to_string(), r.strategy.tag().to_string(), e.n_meas.to_string()];
            row.push(e.leader.map(|l| l.to_string()).unwrap_or_default());
            match &e.query {
                Some(q) => row.extend(q.iter().copied().map(num)),
                None => row.extend(std::iter::repeat_n(String::new(), dim)),
            }
            row.extend(e.nrmse.iter().copied().map(num));
            row.push(num(e.nrmse_sum));
            for values in [&e.cv_raw, &e.cv_filtered] {
                if values.is_empty() {
                    row.extend(std::iter::repeat_n(String::new(), m));
                } else {
                    row.extend(values.iter().copied().map(num));
                }
            }
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads records written by [`write_records`]. Initial designs and noise
/// keys are not part of the file and come back empty.
pub fn read_records(path: &Path, dim: usize, outputs: &[String]) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    if header != records_header(dim, outputs) {
        return Err(CliError::format(path, "header does not match the manifest's inputs and outputs"));
    }
    let m = outputs.len();
    let mut records: Vec<RunRecord> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let bad = |col: &str| CliError::format(path, format!("line {line}: bad value in column '{col}'"));
        let parse_f = |j: usize| -> Result<f64> { row[j].parse().map_err(|_| bad(&header[j])) };
        let opt_f = |range: std::ops::Range<usize>| -> Result<Vec<f64>> {
            if range.clone().all(|j| row[j].is_empty()) {
                Ok(Vec::new())
            } else {
                range.map(parse_f).collect()
            }
        };
        let run: usize = row[0].parse().map_err(|_| bad("run"))?;
        let strategy: StrategyKind = row[1].parse().map_err(|_| bad("strategy"))?;
        let n_meas: usize = row[2].parse().map_err(|_| bad("n_meas"))?;
        let leader = if row[3].is_empty() { None } else { Some(row[3].parse().map_err(|_| bad("leader"))?) };
        let q = opt_f(4..4 + dim)?;
        let base = 4 + dim;
        let entry = RunEntry {
            n_meas,
            leader,
            query: (!q.is_empty()).then_some(q),
            nrmse: (base..base + m).map(parse_f).collect::<Result<_>>()?,
            nrmse_sum: parse_f(base + m)?,
            cv_raw: opt_f(base + m + 1..base + 2 * m + 1)?,
            cv_filtered: opt_f(base + 2 * m + 1..base + 3 * m + 1)?,
            finished: Vec::new(),
        };
        match records.last_mut() {
            Some(r) if r.run == run && r.strategy == strategy => r.entries.push(entry),
            _ => records.push(RunRecord {
                run,
                strategy,
                run_seed: 0,
                noise_keys: Vec::new(),
                initial_design: Vec::new(),
                initial_values: Vec::new(),
                entries: vec![entry],
            }),
        }
    }
    Ok(records)
}

pub fn write_summary(path: &Path, summary: &CurveSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["n_meas".to_string()];
    for c in &summary.curves {
        header.push(format!("{}_mean", c.strategy.tag()));
        header.push(format!("{}_std", c.strategy.tag()));
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, n) in summary.n_meas.iter().enumerate() {
        let mut row = vec![n.to_string()];
        for c in &summary.curves {
            row.push(num(c.mean[i]));
            row.push(num(c.std[i]));
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Savings of every strategy relative to `reference`.
pub fn savings_table(summary: &CurveSummary, reference: StrategyKind) -> Vec<(StrategyKind, Savings)> {
    summary
        .curves
        .iter()
        .filter(|c| c.strategy != reference)
        .map(|c| (c.strategy, compare_savings(summary, reference, c.strategy).expect("both strategies present")))
        .collect()
}

pub fn format_savings(reference: StrategyKind, table: &[(StrategyKind, Savings)]) -> String {
    let mut out = format!("{:<8}{:>10}{:>12}\n", format!("vs {}", reference.tag()), "n", "savings");
    for (k, s) in table {
        match (s.n, s.fraction) {
            (Some(n), Some(f)) => writeln!(out, "{:<8}{:>10}{:>11.1}%", k.tag(), n, 100.0 * f),
            _ => writeln!(out, "{:<8}{:>10}{:>12}", k.tag(), "-", "no savings"),
        }
        .expect("write to string");
    }
    out
}

fn write_savings(path: &Path, reference: StrategyKind, table: &[(StrategyKind, Savings)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["reference", "target", "n_meas", "savings_percent"]).map_err(|e| csv_error(path, e))?;
    for (k, s) in table {
        let n = s.n.map(|n| n.to_string()).unwrap_or_else(|| "none".into());
        let f = s.fraction.map(|f| num(100.0 * f)).unwrap_or_else(|| "none".into());
        w.write_record([reference.tag(), k.tag(), &n, &f]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

const COLORS: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_step(span: f64, target_ticks: f64) -> f64 {
    let raw = span / target_ticks;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Mean curve with a ±σ band per strategy.
pub fn render_svg(summary: &CurveSummary, title: &str) -> String {
    let (w, h) = (720.0, 450.0);
    let (left, right, top, bottom) = (70.0, 110.0, 40.0, 55.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let x0 = summary.p_init() as f64;
    let x1 = (summary.p_max() as f64).max(x0 + 1.0);
    let y_max = summary
        .curves
        .iter()
        .flat_map(|c| c.mean.iter().zip(&c.std).map(|(m, s)| m + s))
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.05;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - y / y_max * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, left + pw / 2.0, xml_escape(title));
    let _ = writeln!(s, r#"<g stroke="black" fill="none"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></g>"#);

    let xs = nice_step(x1 - x0, 9.0);
    let mut t = (x0 / xs).ceil() * xs;
    while t <= x1 + 1e-9 {
        let _ = writeln!(s, r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#ddd"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"##, sx(t), top, top + ph, top + ph + 16.0, t);
        t += xs;
    }
    let ys = nice_step(y_max, 5.0);
    let mut t = 0.0;
    while t <= y_max + 1e-12 {
        let _ = writeln!(s, r##"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="#ddd"/><text x="{3}" y="{4:.2}" text-anchor="end">{5}</text>"##, left, sy(t), left + pw, left - 6.0, sy(t) + 4.0, (t * 1e6).round() / 1e6);
        t += ys;
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">number of measurements</text>"#, left + pw / 2.0, h - 14.0);
    let _ = writeln!(s, r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">aggregate validation NRMSE</text>"#, top + ph / 2.0);

    for (i, c) in summary.curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let tag = c.strategy.tag();
        let mut band: Vec<String> = Vec::new();
        for (j, n) in summary.n_meas.iter().enumerate() {
            band.push(format!("{:.2},{:.2}", sx(*n as f64), sy(c.mean[j] + c.std[j])));
        }
        for (j, n) in summary.n_meas.iter().enumerate().rev() {
            band.push(format!("{:.2},{:.2}", sx(*n as f64), sy((c.mean[j] - c.std[j]).max(0.0))));
        }
        let line: Vec<String> = summary
            .n_meas
            .iter()
            .zip(&c.mean)
            .map(|(n, m)| format!("{:.2},{:.2}", sx(*n as f64), sy(*m)))
            .collect();
        let _ = writeln!(s, r#"<g id="strategy-{tag}"><polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/><polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/></g>"#, band.join(" "), line.join(" "));
        let ly = top + 14.0 + 20.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{tag}</text>"#, lx + 22.0, lx + 28.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Files written for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub summary: CurveSummary,
    pub savings: Vec<(StrategyKind, Savings)>,
    pub files: Vec<PathBuf>,
}

/// Summary, savings and plot from records. Savings are measured against SF
/// when it is present, otherwise against the first strategy.
pub fn write_reports(dir: &Path, records: &[RunRecord], title: &str) -> Result<Written> {
    let summary = aggregate(records)?;
    let reference = summary
        .curve(StrategyKind::Sf)
        .map_or(summary.curves[0].strategy, |c| c.strategy);
    let savings = savings_table(&summary, reference);
    let files = vec![dir.join(SUMMARY_FILE), dir.join(SAVINGS_FILE), dir.join(PLOT_FILE)];
    write_summary(&files[0], &summary)?;
    write_savings(&files[1], reference, &savings)?;
    write_file(&files[2], &render_svg(&summary, title))?;
    Ok(Written { summary, savings, files })
}

pub fn write_all(dir: &Path, manifest: &Manifest, records: &[RunRecord]) -> Result<Written> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_file(&manifest_path, &(json + "\n"))?;
    let records_path = dir.join(RECORDS_FILE);
    write_records(&records_path, records, manifest.dim, &manifest.outputs)?;
    let mut written = write_reports(dir, records, &manifest.problem)?;
    written.files.splice(0..0, [manifest_path, records_path]);
    Ok(written)
}
