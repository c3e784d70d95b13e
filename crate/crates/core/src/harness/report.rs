//! CSV metric tables and JSON-lines risk traces.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::DetectorKind;
use crate::error::{Error, Result};
use crate::harness::bench::BenchmarkResult;

pub const CSV_HEADER: [&str; 10] = [
    "Algorithm",
    "Parameters",
    "F1 Score",
    "Accuracy",
    "Precision",
    "Recall",
    "Alarm-to-Collision Average [s]",
    "Alarm-to-Collision Median [s]",
    "Runtime Average [s]",
    "Runtime Median [s]",
];

/// Detector output at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonitorOutput {
    Rsr { lower: f64, upper: f64, tau: usize },
    CollisionProb { perceived: f64, plausible: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub scenario: String,
    pub detector: DetectorKind,
    pub time: f64,
    /// False on steps where no fault was active and the monitor was idle.
    pub active: bool,
    #[serde(flatten)]
    pub output: MonitorOutput,
    pub alarm: bool,
    pub gamma: f64,
    pub collision_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Trace,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Metric table, one row per result. Runtime cells stay empty unless
/// `timing` is set, so that the table is reproducible byte for byte.
pub fn write_csv<W: Write>(results: &[BenchmarkResult], out: W, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        let m = &r.metrics;
        let runtime = |v: Option<f64>| if timing { cell(v) } else { String::new() };
        w.write_record([
            r.algorithm.clone(),
            r.parameters.clone(),
            cell(Some(m.f1)),
            cell(Some(m.accuracy)),
            cell(Some(m.precision)),
            cell(Some(m.recall)),
            cell(m.alarm_to_collision_mean),
            cell(m.alarm_to_collision_median),
            runtime(m.runtime_mean),
            runtime(m.runtime_median),
        ])?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}

/// One JSON object per step per scenario.
pub fn write_trace<W: Write>(results: &[BenchmarkResult], out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    for r in results {
        for s in &r.scenarios {
            for entry in &s.trace {
                serde_json::to_writer(&mut w, entry)?;
                w.write_all(b"\n").map_err(|e| Error::io("trace output", e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("trace output", e))?;
    Ok(())
}

/// Write a report file in the given format.
pub fn emit_report(results: &[BenchmarkResult], format: ReportFormat, path: &Path, timing: bool) -> Result<()> {
    if results.iter().all(|r| r.scenarios.is_empty()) {
        return Err(Error::NoScenarios);
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    match format {
        ReportFormat::Csv => write_csv(results, file, timing),
        ReportFormat::Trace => write_trace(results, file),
    }
}
