//! Per-epoch metrics rows and their CSV form.
//!
//! Files open with the line [`METRICS_HEADER`], followed by a CSV header and
//! one row per (seed, epoch), sorted by seed then epoch. Columns:
//!
//! | column | meaning |
//! |---|---|
//! | `run_id` | `<config name>-s<seed>` |
//! | `seed`, `epoch` | epoch counts from 1 |
//! | `episodic_return` | mean unshaped return of training episodes finished this epoch (empty if none) |
//! | `episodes` | training episodes finished this epoch |
//! | `eval_return`, `eval_success` | evaluation mean return and success fraction at `eval.epsilon` (empty off cadence) |
//! | `sum_q` | sum of the tabular target values (empty for networks) |
//! | `table_sizes`, `table_inserts` | per-table sizes and insert counts, `;`-separated, default table first |
//! | `scenario_returns` | `name=return` pairs of the evaluation episodes per skill scenario |
//! | `status` | `ok`, or `failed: <reason>` on the epoch a run aborted |
//! | `wall_time_s` | seconds since the seed started; the only nondeterministic column |

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const METRICS_HEADER: &str = "# sset-metrics v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    pub epoch: usize,
    pub episodic_return: Option<f64>,
    pub episodes: usize,
    pub eval_return: Option<f64>,
    pub eval_success: Option<f64>,
    pub sum_q: Option<f64>,
    pub table_sizes: String,
    pub table_inserts: String,
    pub scenario_returns: String,
    pub status: String,
    pub wall_time_s: f64,
}

impl MetricsRow {
    pub fn failed(&self) -> bool {
        self.status != "ok"
    }
}

/// Renders rows (in the given order) as the full file text.
pub fn render_metrics(rows: &[MetricsRow]) -> Result<String, HarnessError> {
    let mut out = Vec::new();
    writeln!(out, "{METRICS_HEADER}")?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        if rows.is_empty() {
            w.write_record(column_names())?;
        }
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| HarnessError::Metrics(e.to_string()))
}

pub fn column_names() -> [&'static str; 13] {
    [
        "run_id",
        "seed",
        "epoch",
        "episodic_return",
        "episodes",
        "eval_return",
        "eval_success",
        "sum_q",
        "table_sizes",
        "table_inserts",
        "scenario_returns",
        "status",
        "wall_time_s",
    ]
}

/// Writes through a temporary file and a rename, so readers never see a partial file.
pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<(), HarnessError> {
    let text = render_metrics(rows)?;
    let tmp = path.with_extension("csv.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    let text = fs::read_to_string(path)?;
    parse_metrics(&text).map_err(|e| HarnessError::Metrics(format!("{}: {e}", path.display())))
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>, HarnessError> {
    let body = text
        .strip_prefix(METRICS_HEADER)
        .ok_or_else(|| HarnessError::Metrics(format!("missing {METRICS_HEADER:?} line")))?
        .trim_start_matches(['\r', '\n']);
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().ne(column_names()) {
        return Err(HarnessError::Metrics(format!("unexpected columns {:?}", headers.iter().collect::<Vec<_>>())));
    }
    reader.deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}

/// The file text with the wall-time column removed, for reproducibility comparisons.
pub fn strip_wall_time(text: &str) -> String {
    text.lines()
        .map(|line| match line.rfind(',') {
            Some(i) if !line.starts_with('#') => &line[..i],
            _ => line,
        })
        .collect::<Vec<_>>()
        .join("\n")
}
