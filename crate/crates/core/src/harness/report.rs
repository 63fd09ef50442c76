//! Report files: per-window CSV or JSONL, and a summary JSON.
//!
//! CSV columns, in order: `window_id, ground_truth, prediction,
//! cumulative_mae, cumulative_r2, elapsed_ns, cumulative_ns, drifted,
//! p_value, provenance, model_version, retrained, evaluated, error`.
//! Empty cells are absent values.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::experiment::{ExperimentParams, ExperimentReport, ExperimentSummary, WindowRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Jsonl,
    SummaryJson,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            "summary-json" => Ok(Self::SummaryJson),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SummaryFile {
    params: ExperimentParams,
    summary: ExperimentSummary,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_records_csv<W: Write>(records: &[WindowRecord], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    let header = [
        "window_id",
        "ground_truth",
        "prediction",
        "cumulative_mae",
        "cumulative_r2",
        "elapsed_ns",
        "cumulative_ns",
        "drifted",
        "p_value",
        "provenance",
        "model_version",
        "retrained",
        "evaluated",
        "error",
    ];
    let csv_err = |e: csv::Error| Error::Parse { line: 0, reason: e.to_string() };
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse { line: 0, reason: e.to_string() })
}

pub fn read_records_csv<R: std::io::Read>(source: R) -> Result<Vec<WindowRecord>> {
    let mut rd = csv::Reader::from_reader(source);
    rd.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Parse { line: i + 2, reason: e.to_string() }))
        .collect()
}

pub fn read_records_jsonl<R: BufRead>(source: R) -> Result<Vec<WindowRecord>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { line: i + 1, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, reason: e.to_string() })?);
    }
    Ok(out)
}

/// Writes one view of the report to `path`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e: std::io::Error| Error::io(path, e);
    match format {
        ReportFormat::Csv => write_records_csv(&report.records, &mut w)?,
        ReportFormat::Jsonl => {
            for r in &report.records {
                serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
                writeln!(w).map_err(io)?;
            }
        }
        ReportFormat::SummaryJson => {
            let file = SummaryFile {
                params: report.params.clone(),
                summary: report.summary.clone(),
            };
            serde_json::to_writer_pretty(&mut w, &file).map_err(|e| Error::io(path, e.into()))?;
            writeln!(w).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Rebuilds a report from a records file (CSV or JSONL, chosen by
/// extension) and a summary JSON.
pub fn read_report(records: &Path, summary: &Path) -> Result<ExperimentReport> {
    let file = fs::File::open(records).map_err(|e| Error::io(records, e))?;
    let recs = match records.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_records_csv(file)?,
        _ => read_records_jsonl(BufReader::new(file))?,
    };
    let text = fs::read_to_string(summary).map_err(|e| Error::io(summary, e))?;
    let s: SummaryFile = serde_json::from_str(&text).map_err(|e| Error::artifact(summary, e))?;
    Ok(ExperimentReport {
        params: s.params,
        records: recs,
        summary: s.summary,
    })
}
