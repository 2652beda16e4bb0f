//! Rebuilding and rendering experiment reports from a run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kan_core::eval::{ExperimentReport, SequenceReport, REPORT_SCHEMA_VERSION};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, IoContext, Result};

pub const REPORT_FILE: &str = "report.json";
pub const SEQUENCE_DIR: &str = "sequences";
pub const TABLE_FILES: [&str; 3] = ["table1.csv", "table2.csv", "table3.csv"];

/// One finished (model, sequence) run as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredSequence {
    pub schema_version: u32,
    pub report: SequenceReport,
}

impl StoredSequence {
    pub fn new(report: SequenceReport) -> Self {
        StoredSequence {
            schema_version: REPORT_SCHEMA_VERSION,
            report,
        }
    }
}

/// Every stored sequence report under `run`, in file-name order.
pub fn read_sequences(run: &Path) -> Result<Vec<StoredSequence>> {
    let dir = run.join(SEQUENCE_DIR);
    if !dir.is_dir() {
        return Err(CliError::Data(format!("{}: no sequence reports", run.display())));
    }
    let mut files: Vec<_> = fs::read_dir(&dir)
        .at(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path().join(REPORT_FILE)))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("{}: no sequence reports", run.display())));
    }
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).at(p)?;
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Aggregates stored sequence reports, refusing mixed schema versions.
pub fn aggregate(stored: Vec<StoredSequence>, checkpoints: &[usize]) -> Result<ExperimentReport> {
    let mut versions: Vec<u32> = stored.iter().map(|s| s.schema_version).collect();
    versions.sort_unstable();
    versions.dedup();
    if versions != [REPORT_SCHEMA_VERSION] {
        return Err(CliError::Data(format!(
            "report schema versions {versions:?} found; this build reads only version {REPORT_SCHEMA_VERSION}"
        )));
    }
    Ok(ExperimentReport::build(
        stored.into_iter().map(|s| s.report).collect(),
        checkpoints,
    )?)
}

/// Writes the JSON report and the three CSV tables into `run`.
pub fn write_outputs(run: &Path, report: &ExperimentReport) -> Result<()> {
    let files = [
        (REPORT_FILE, report.to_json()?),
        (TABLE_FILES[0], report.table1_csv()?),
        (TABLE_FILES[1], report.table2_csv()?),
        (TABLE_FILES[2], report.table3_csv()?),
    ];
    for (name, text) in files {
        fs::write(run.join(name), text).at(run.join(name))?;
    }
    Ok(())
}

/// Plain-text rendering of the three tables.
pub fn render(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<6} {:>9} {:>9}", "model", "all", "last");
    for m in &report.summary {
        let _ = writeln!(s, "{:<6} {:>9.4} {:>9.4}", m.model.name(), m.all_tasks, m.last_task);
    }
    s.push('\n');
    let _ = writeln!(s, "{:<6} {:>6} {:>9} {:>9}", "model", "tasks", "forward", "backward");
    for m in &report.summary {
        for r in &m.transfer {
            let _ = writeln!(s, "{:<6} {:>6} {:>9.4} {:>9.4}", m.model.name(), r.tasks, r.forward, r.backward);
        }
    }
    if !report.comparisons.is_empty() {
        s.push('\n');
        let _ = writeln!(s, "paired t-test by {}", report.pairing);
        for c in &report.comparisons {
            let _ = writeln!(
                s,
                "{} vs {}: mean diff {:+.4}, p {:.4}",
                c.a.name(),
                c.b.name(),
                c.test.mean_diff,
                c.test.p
            );
        }
    }
    s
}
