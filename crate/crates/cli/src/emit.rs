//! Report files: one structured object per experiment, `summary.csv`, and the run manifest.

use std::io;
use std::path::{Path, PathBuf};

use hyperstab_core::{ExperimentConfig, StabilityReport, Verdict};
use serde::Serialize;

pub const REPORT_SCHEMA_ID: &str = "hyperstab-report/1";

pub const SUMMARY_HEADER: [&str; 15] = [
    "name",
    "theorem",
    "algebra",
    "verdict",
    "forced",
    "hypotheses_passed",
    "first_failed_hypothesis",
    "sup_h_minus_limit",
    "sup_triple_defect_limit",
    "sup_triple_defect_map",
    "sup_derivation_defect",
    "sup_linearity_defect",
    "phi_bound",
    "max_k_stop",
    "samples",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Obj,
    Csv,
    Both,
}

impl Format {
    pub fn objects(self) -> bool {
        matches!(self, Format::Obj | Format::Both)
    }

    pub fn table(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Serialize)]
pub struct ReportFile<'a> {
    pub schema: &'static str,
    pub substream: u64,
    pub config: &'a ExperimentConfig,
    #[serde(flatten)]
    pub report: &'a StabilityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub substream: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    /// SHA-256 of `blob <len>\0<content>`, as `git hash-object` computes it.
    pub config_hash: String,
    pub tool_version: String,
    pub global_seed: u64,
    pub jobs: usize,
    pub force_conclusions: bool,
    pub started: String,
    pub finished: String,
    pub experiments: Vec<ManifestEntry>,
}

/// Seventeen significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn report_file_name(name: &str) -> String {
    format!("{name}.report.json")
}

pub fn summary_row(r: &StabilityReport) -> Vec<String> {
    let c = &r.conclusion_results;
    vec![
        r.name.clone(),
        r.theorem.clone(),
        r.algebra.clone(),
        r.verdict.to_string(),
        r.forced.to_string(),
        r.hypotheses_passed().to_string(),
        r.first_failed_hypothesis().map(|h| h.name.clone()).unwrap_or_default(),
        fmt_opt(c.sup_h_minus_limit),
        fmt_opt(c.sup_triple_defect_limit),
        fmt_opt(c.sup_triple_defect_map),
        fmt_opt(c.sup_derivation_defect),
        fmt_opt(c.sup_linearity_defect),
        fmt_opt(c.phi_bound),
        r.h_trace.iter().map(|t| t.k_stop).max().map(|k| k.to_string()).unwrap_or_default(),
        r.h_trace.len().to_string(),
    ]
}

pub fn write_summary(path: &Path, reports: &[&StabilityReport]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in reports {
        w.write_record(summary_row(r))?;
    }
    w.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

pub fn write_report(dir: &Path, config: &ExperimentConfig, substream: u64, report: &StabilityReport) -> io::Result<PathBuf> {
    let path = dir.join(report_file_name(&report.name));
    write_json(
        &path,
        &ReportFile {
            schema: REPORT_SCHEMA_ID,
            substream,
            config,
            report,
        },
    )?;
    Ok(path)
}
