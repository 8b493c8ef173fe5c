//! Success counts from a shifted start, checkpointed during training.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::metrics::{write_metrics, MetricsRow};
use crate::runner::{initial_eval, run_rows};
use crate::HarnessError;

/// Default checkpoint spacing in epochs.
pub const CHECKPOINT_EVERY: usize = 20;

/// Default shifted start `[x, y, heading]`.
pub const SHIFTED_START: [usize; 3] = [1, 4, 0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// 0 is the untrained agent.
    pub epoch: usize,
    /// Successful evaluation episodes summed over seeds.
    pub successes: usize,
    pub episodes: usize,
    pub seeds: usize,
    /// Per-seed successes, in seed-list order.
    pub per_seed: Vec<usize>,
}

/// Trains every seed of `config`, evaluating from the shifted start (the
/// config's `eval.start`, else [`SHIFTED_START`]) at epoch 0 and every
/// `eval.every` epochs. Writes `metrics.csv`, `forgetting.csv` and
/// `config.json` into `out` when given.
pub fn forgetting_eval(config: &ExperimentConfig, out: Option<&Path>) -> Result<(Vec<Checkpoint>, Vec<MetricsRow>), HarnessError> {
    let mut config = config.clone();
    config.eval.start.get_or_insert(SHIFTED_START);
    config.validate()?;

    let mut initial = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        initial.push(initial_eval(&config, seed)?.successes);
    }
    let rows = run_rows(&config)?;

    let episodes = config.eval.episodes;
    let mut checkpoints = vec![Checkpoint {
        epoch: 0,
        successes: initial.iter().sum(),
        episodes: episodes * config.seeds.len(),
        seeds: config.seeds.len(),
        per_seed: initial,
    }];
    let mut epochs: Vec<usize> = rows.iter().filter(|r| r.eval_success.is_some()).map(|r| r.epoch).collect();
    epochs.sort_unstable();
    epochs.dedup();
    for epoch in epochs {
        let per_seed: Vec<usize> = config
            .seeds
            .iter()
            .map(|&seed| {
                rows.iter()
                    .find(|r| r.seed == seed && r.epoch == epoch)
                    .and_then(|r| r.eval_success)
                    .map_or(0, |rate| (rate * episodes as f64).round() as usize)
            })
            .collect();
        checkpoints.push(Checkpoint {
            epoch,
            successes: per_seed.iter().sum(),
            episodes: episodes * config.seeds.len(),
            seeds: config.seeds.len(),
            per_seed,
        });
    }

    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.json"), config.to_json() + "\n")?;
        write_metrics(&dir.join("metrics.csv"), &rows)?;
        let mut w = csv::Writer::from_path(dir.join("forgetting.csv"))?;
        w.write_record(["epoch", "successes", "episodes", "seeds", "per_seed"])?;
        for c in &checkpoints {
            let per_seed = c.per_seed.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
            w.write_record([
                c.epoch.to_string(),
                c.successes.to_string(),
                c.episodes.to_string(),
                c.seeds.to_string(),
                per_seed,
            ])?;
        }
        w.flush()?;
    }
    Ok((checkpoints, rows))
}
