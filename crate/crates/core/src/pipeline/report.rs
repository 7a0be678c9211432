//! Report files: `report.json`, the per-size and per-team CSV tables and the fusion audit log.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use super::evaluate::EvalReport;
use super::PipelineError;
use crate::fusion::{write_audit_jsonl, FusionAudit};

pub const REPORT_FILE: &str = "report.json";
pub const SIZES_FILE: &str = "sizes.csv";
pub const TEAMS_FILE: &str = "teams.csv";
pub const AUDIT_FILE: &str = "fusion_audit.jsonl";

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> PipelineError + '_ {
    move |e| PipelineError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn report_to_json(report: &EvalReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialises")
}

pub fn report_from_json(text: &str) -> Result<EvalReport, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn read_report(path: &Path) -> Result<EvalReport, PipelineError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    report_from_json(&text).map_err(|e| PipelineError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// `size,mean_decision,std_decision,mean_feature,std_feature`.
pub fn write_sizes_csv(report: &EvalReport, path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["size", "mean_decision", "std_decision", "mean_feature", "std_feature"])
        .map_err(csv_err(path))?;
    for s in &report.sizes {
        w.write_record([
            s.size.to_string(),
            cell(s.mean_decision),
            cell(s.std_decision),
            cell(s.mean_feature),
            cell(s.std_feature),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn write_teams_csv(report: &EvalReport, path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "team",
        "size",
        "decision_accuracy",
        "decision_macro_f1",
        "feature_accuracy",
        "feature_macro_f1",
        "windows",
    ])
    .map_err(csv_err(path))?;
    for t in &report.teams {
        let d = t.decision.as_ref();
        let f = t.feature.as_ref();
        w.write_record([
            t.team.label(),
            t.size.to_string(),
            cell(d.map(|s| s.accuracy)),
            cell(d.map(|s| s.macro_f1)),
            cell(f.map(|s| s.accuracy)),
            cell(f.map(|s| s.macro_f1)),
            d.map_or(0, |s| s.windows).to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

/// Writes all report files into `out_dir`.
pub fn emit_report(report: &EvalReport, audit: &[FusionAudit], out_dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let json = out_dir.join(REPORT_FILE);
    fs::write(&json, report_to_json(report) + "\n").map_err(io(&json))?;
    write_sizes_csv(report, &out_dir.join(SIZES_FILE))?;
    write_teams_csv(report, &out_dir.join(TEAMS_FILE))?;
    let audit_path = out_dir.join(AUDIT_FILE);
    let file = File::create(&audit_path).map_err(io(&audit_path))?;
    write_audit_jsonl(BufWriter::new(file), audit).map_err(io(&audit_path))
}
