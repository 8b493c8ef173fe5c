//! One run per value of a config axis.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::runner::run;
use crate::summarize::{aggregate, Stat};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// The value as written on the command line (compact JSON).
    pub label: String,
    pub final_epoch: usize,
    pub episodic_return: Option<Stat>,
    pub eval_return: Option<Stat>,
    pub eval_success: Option<Stat>,
    pub sum_q: Option<Stat>,
    pub failures: usize,
}

fn dir_name(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_' | '=') { c } else { '_' })
        .collect()
}

/// Runs `base` with `axis` set to each value in `out/<axis>=<value>/`, then
/// writes final-epoch statistics per value to `out/sweep.csv`. All configs are
/// resolved before the first run, so a bad axis fails fast.
pub fn sweep(base: &ExperimentConfig, axis: &str, values: &[Value], out: &Path) -> Result<Vec<SweepPoint>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|v| base.with_path(axis, v.clone()).map(|c| (v.to_string(), c)))
        .collect::<Result<Vec<_>, _>>()?;

    fs::create_dir_all(out)?;
    let mut points = Vec::with_capacity(configs.len());
    for (label, config) in &configs {
        let result = run(config, &out.join(dir_name(&format!("{axis}={label}"))))?;
        let summary = aggregate(label, &result.rows);
        let last = summary.last();
        points.push(SweepPoint {
            label: label.clone(),
            final_epoch: last.map_or(0, |s| s.epoch),
            episodic_return: last.and_then(|s| s.episodic_return),
            eval_return: last.and_then(|s| s.eval_return),
            eval_success: last.and_then(|s| s.eval_success),
            sum_q: last.and_then(|s| s.sum_q),
            failures: result.failures.len(),
        });
    }

    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    let mut header = vec!["axis".to_string(), "value".into(), "final_epoch".into(), "failures".into()];
    for name in ["episodic_return", "eval_return", "eval_success", "sum_q"] {
        header.extend([format!("{name}_mean"), format!("{name}_se")]);
    }
    w.write_record(&header)?;
    for p in &points {
        let mut rec = vec![axis.to_string(), p.label.clone(), p.final_epoch.to_string(), p.failures.to_string()];
        for stat in [p.episodic_return, p.eval_return, p.eval_success, p.sum_q] {
            match stat {
                Some(s) => rec.extend([s.mean.to_string(), s.std_err.to_string()]),
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(points)
}
