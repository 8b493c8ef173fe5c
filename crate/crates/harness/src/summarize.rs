//! Across-seed aggregation of metrics files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::metrics::{read_metrics, MetricsRow};
use crate::HarnessError;

/// Mean and standard error (sample std over `sqrt(n)`) of one column at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl Stat {
    /// `None` for an empty sample. A single value has zero error.
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std_err, n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// Metrics file the row aggregates, relative to the summarized directory.
    pub source: String,
    pub epoch: usize,
    pub episodic_return: Option<Stat>,
    pub eval_return: Option<Stat>,
    pub eval_success: Option<Stat>,
    pub sum_q: Option<Stat>,
}

/// Per-epoch statistics of one metrics file. Failed rows are skipped.
pub fn aggregate(source: &str, rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut by_epoch: BTreeMap<usize, Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.failed()) {
        by_epoch.entry(r.epoch).or_default().push(r);
    }
    by_epoch
        .into_iter()
        .map(|(epoch, rs)| {
            let col = |f: fn(&MetricsRow) -> Option<f64>| Stat::of(&rs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                source: source.to_string(),
                epoch,
                episodic_return: col(|r| r.episodic_return),
                eval_return: col(|r| r.eval_return),
                eval_success: col(|r| r.eval_success),
                sum_q: col(|r| r.sum_q),
            }
        })
        .collect()
}

fn find_metrics(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            find_metrics(&path, found)?;
        } else if path.file_name().is_some_and(|n| n == "metrics.csv") {
            found.push(path);
        }
    }
    Ok(())
}

/// Aggregates every `metrics.csv` below `dir` into `dir/summary.csv`.
/// Any file without the expected header aborts the summary.
pub fn summarize(dir: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut files = Vec::new();
    find_metrics(dir, &mut files)?;
    if files.is_empty() {
        return Err(HarnessError::Metrics(format!("no metrics.csv under {}", dir.display())));
    }
    let mut summary = Vec::new();
    for f in &files {
        let rows = read_metrics(f)?;
        let source = f.strip_prefix(dir).unwrap_or(f).display().to_string();
        summary.extend(aggregate(&source, &rows));
    }

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    let mut header = vec!["source".to_string(), "epoch".to_string()];
    for name in ["episodic_return", "eval_return", "eval_success", "sum_q"] {
        header.extend([format!("{name}_mean"), format!("{name}_se"), format!("{name}_n")]);
    }
    w.write_record(&header)?;
    for s in &summary {
        let mut rec = vec![s.source.clone(), s.epoch.to_string()];
        for stat in [s.episodic_return, s.eval_return, s.eval_success, s.sum_q] {
            match stat {
                Some(st) => rec.extend([st.mean.to_string(), st.std_err.to_string(), st.n.to_string()]),
                None => rec.extend([String::new(), String::new(), "0".into()]),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(summary)
}
