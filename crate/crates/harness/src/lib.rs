//! Multi-seed experiment runner for event-table replay: JSON configs, seeded
//! runs over the gridworlds, CSV metrics, sweeps, summaries and a theory report.

pub mod agent;
pub mod config;
pub mod forgetting;
pub mod metrics;
pub mod runner;
pub mod sampler;
pub mod summarize;
pub mod sweep;
pub mod theory_report;

use thiserror::Error;

pub use config::{
    EnvConfig, EnvKind, EvalConfig, EventConfig, ExperimentConfig, LearnerConfig, LearnerKind, SamplerConfig,
    SamplerKind, ShapingKind,
};
pub use forgetting::{forgetting_eval, Checkpoint};
pub use metrics::{read_metrics, write_metrics, MetricsRow, METRICS_HEADER};
pub use runner::{run, run_seed, RunOutput};
pub use summarize::{summarize, SummaryRow};
pub use sweep::{sweep, SweepPoint};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SSET_OUT";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Metrics(e.to_string())
    }
}
