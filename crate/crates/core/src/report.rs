//! CSV and manifest output.
//!
//! All reals are printed in fixed notation with six digits after the point;
//! undefined values (a CI from a single run, a gain over a zero baseline)
//! print as `n/a`. Nothing time- or host-dependent is written, so identical
//! inputs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::admission::SchemeKind;
use crate::config::render_config;
use crate::error::{Error, Result};
use crate::experiment::{AggregateReport, ExperimentConfig};

pub const USAGE_HEADER: &str = "timestamp_s,usage_bps,moving_avg_bps,scheme,run_seed";
pub const SUMMARY_HEADER: &str = "scheme,runs,mean_blocking,ci95_blocking,mean_utilization,ci95_utilization";
pub const GAINS_HEADER: &str = "target_scheme,baseline_scheme,blocking_decrease_pct,utilization_increase_pct";
pub const DECISIONS_HEADER: &str =
    "time_s,flow_id,source_tag,scheme,admit,request_bps,estimate_bps,criterion_rhs_bps,counted,run_seed";

const UTILIZATION_GAIN_NOTE: &str = "utilization_increase_pct is relative: \
(U_target - U_baseline) / U_baseline * 100, not a difference in percentage points";

/// Paths written by [`emit_reports`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputBundle {
    pub usage_series_csv: Vec<PathBuf>,
    pub decisions_csv: Vec<PathBuf>,
    pub coupled_csv: Option<PathBuf>,
    pub summary_csv: PathBuf,
    pub gains_csv: PathBuf,
    pub manifest: PathBuf,
}

pub fn fmt_real(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), fmt_real)
}

fn file_stem(label: &str) -> String {
    label.to_ascii_lowercase()
}

pub fn summary_csv(report: &AggregateReport) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.label,
            s.runs,
            fmt_real(s.mean_blocking),
            fmt_opt(s.ci95_blocking),
            fmt_real(s.mean_utilization),
            fmt_opt(s.ci95_utilization)
        );
    }
    out
}

pub fn gains_csv(report: &AggregateReport) -> String {
    let mut out = format!("{GAINS_HEADER}\n");
    for g in &report.gains {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            g.target,
            g.baseline,
            fmt_opt(g.blocking_decrease_pct),
            fmt_opt(g.utilization_increase_pct)
        );
    }
    out
}

fn labels(report: &AggregateReport) -> Vec<&str> {
    let mut labels: Vec<&str> = Vec::new();
    for r in &report.runs {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    labels
}

pub fn usage_csv(report: &AggregateReport, label: &str) -> String {
    let mut out = format!("{USAGE_HEADER}\n");
    for run in report.runs_for(label) {
        for row in &run.usage_series {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_real(row.timestamp),
                fmt_real(row.usage),
                fmt_real(row.moving_average),
                run.label,
                run.seed
            );
        }
    }
    out
}

pub fn decisions_csv(report: &AggregateReport, label: &str) -> String {
    let mut out = format!("{DECISIONS_HEADER}\n");
    for run in report.runs_for(label) {
        for d in &run.decisions {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_real(d.time),
                d.flow_id,
                d.source_tag,
                d.decision.scheme,
                d.decision.admit,
                fmt_real(d.decision.request),
                fmt_real(d.decision.estimate),
                fmt_real(d.decision.criterion_rhs),
                d.counted,
                run.seed
            );
        }
    }
    out
}

/// One row per arrival in coupled runs, with every scheme's verdict.
pub fn coupled_csv(report: &AggregateReport) -> Option<String> {
    if report.runs.iter().all(|r| r.coupled.is_empty()) {
        return None;
    }
    let mut out = String::from("time_s,flow_id,run_seed");
    for s in SchemeKind::ALL {
        let _ = write!(out, ",{s}_admit,{s}_estimate_bps");
    }
    out.push('\n');
    for run in &report.runs {
        for rec in &run.coupled {
            let _ = write!(out, "{},{},{}", fmt_real(rec.time), rec.flow_id, run.seed);
            for s in SchemeKind::ALL {
                match rec.verdict(s) {
                    Some(d) => {
                        let _ = write!(out, ",{},{}", d.admit, fmt_real(d.estimate));
                    }
                    None => out.push_str(",n/a,n/a"),
                }
            }
            out.push('\n');
        }
    }
    Some(out)
}

#[derive(Serialize)]
struct ManifestFile {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: String,
    seeds: Vec<u64>,
    labels: Vec<&'a str>,
    files: Vec<ManifestFile>,
    notes: Vec<&'static str>,
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<ManifestFile>) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    files.push(ManifestFile {
        name: name.to_string(),
        sha256: format!("{:x}", Sha256::digest(contents.as_bytes())),
    });
    Ok(path)
}

/// Writes the CSV artifacts and `manifest.json` for `report` into `out_dir`.
pub fn emit_reports(report: &AggregateReport, config: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<OutputBundle> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let labels = labels(report);

    let mut usage_series_csv = Vec::new();
    let mut decisions = Vec::new();
    for label in &labels {
        let stem = file_stem(label);
        usage_series_csv.push(write_file(
            dir,
            &format!("usage_series_{stem}.csv"),
            &usage_csv(report, label),
            &mut files,
        )?);
        decisions.push(write_file(
            dir,
            &format!("decisions_{stem}.csv"),
            &decisions_csv(report, label),
            &mut files,
        )?);
    }
    let coupled = coupled_csv(report)
        .map(|text| write_file(dir, "coupled_decisions.csv", &text, &mut files))
        .transpose()?;
    let summary = write_file(dir, "summary.csv", &summary_csv(report), &mut files)?;
    let gains = write_file(dir, "gains.csv", &gains_csv(report), &mut files)?;

    let mut seeds: Vec<u64> = report.runs.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let manifest = Manifest {
        config: render_config(config),
        seeds,
        labels,
        files,
        notes: vec![UTILIZATION_GAIN_NOTE],
    };
    let manifest_path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;

    Ok(OutputBundle {
        usage_series_csv,
        decisions_csv: decisions,
        coupled_csv: coupled,
        summary_csv: summary,
        gains_csv: gains,
        manifest: manifest_path,
    })
}
