use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sset_harness::config::{parse_value, ExperimentConfig, SamplerKind};
use sset_harness::forgetting::CHECKPOINT_EVERY;
use sset_harness::theory_report::{verify_theory, Budget, Suite};
use sset_harness::{forgetting_eval, run, summarize, sweep, HarnessError, OUT_ENV};

#[derive(Parser)]
#[command(name = "sset", about = "Event-table replay experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a config and write metrics.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to $SSET_OUT/<name> or runs/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seed override.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Sampler kind override.
        #[arg(long)]
        sampler: Option<String>,
    },
    /// One run per value of a dotted config path.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-epoch mean and standard error of every metrics.csv under a directory.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Numerical checks of the sampling theory.
    VerifyTheory {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Success counts from a shifted start at training checkpoints.
    ForgettingEval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Checkpoint spacing in epochs.
        #[arg(long, default_value_t = CHECKPOINT_EVERY)]
        every: usize,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        sampler: Option<String>,
    },
}

fn default_out(name: &str, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        root.join(name)
    })
}

fn load(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    ExperimentConfig::load(path)
}

/// Loads a config and applies the command-line seed and sampler overrides.
fn load_with(path: &Path, seeds: Option<Vec<u64>>, sampler: Option<String>) -> Result<ExperimentConfig, HarnessError> {
    let mut config = load(path)?;
    if let Some(seeds) = seeds {
        config.seeds = seeds;
    }
    if let Some(kind) = sampler {
        config.sampler.kind = SamplerKind::parse(&kind)?;
    }
    config.validate()?;
    Ok(config)
}

fn execute(command: Command) -> Result<bool, HarnessError> {
    match command {
        Command::Run { config, out, seeds, sampler } => {
            let config = load_with(&config, seeds, sampler)?;
            let out = default_out(&config.name, out);
            let result = run(&config, &out)?;
            println!("wrote {} rows to {}", result.rows.len(), out.join("metrics.csv").display());
            for (seed, status) in &result.failures {
                eprintln!("seed {seed}: {status}");
            }
            Ok(result.failures.is_empty())
        }
        Command::Sweep { config, axis, values, out } => {
            let config = load(&config)?;
            let values: Vec<_> = values.iter().map(|v| parse_value(v)).collect();
            let out = default_out(&format!("{}-sweep", config.name), out);
            let points = sweep(&config, &axis, &values, &out)?;
            for p in &points {
                let ret = p.eval_return.map_or("-".to_string(), |s| format!("{:.4} ± {:.4}", s.mean, s.std_err));
                println!("{axis}={}: final eval return {ret}", p.label);
            }
            Ok(points.iter().all(|p| p.failures == 0))
        }
        Command::Summarize { input } => {
            let rows = summarize(&input)?;
            println!("wrote {} rows to {}", rows.len(), input.join("summary.csv").display());
            Ok(true)
        }
        Command::VerifyTheory { suite } => {
            let report = verify_theory(Suite::parse(&suite)?, &Budget::default())?;
            println!("{report}");
            Ok(report.passed())
        }
        Command::ForgettingEval { config, out, every, seeds, sampler } => {
            let mut config = load_with(&config, seeds, sampler)?;
            config.eval.every = every;
            let out = default_out(&format!("{}-forgetting", config.name), out);
            let (checkpoints, rows) = forgetting_eval(&config, Some(&out))?;
            for c in &checkpoints {
                println!("epoch {:>5}: {}/{} successes", c.epoch, c.successes, c.episodes);
            }
            Ok(rows.iter().all(|r| !r.failed()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
