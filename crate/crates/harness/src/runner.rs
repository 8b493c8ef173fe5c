//! Seeded training runs: environment interaction interleaved with replay
//! updates, greedy evaluation at a fixed cadence, one metrics row per epoch.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sset_core::envs::{
    obstacle_course_env, shaping_env, skill_env, three_room_env, CourseSpec, Dir, GridWorld, Pose,
    PotentialShaper, Shaped, Skill, Tile,
};
use sset_core::replay::Transition;

use crate::agent::Agent;
use crate::config::{EnvConfig, EnvKind, EvalConfig, ExperimentConfig, ShapingKind};
use crate::metrics::{write_metrics, MetricsRow};
use crate::sampler::Sampler;
use crate::HarnessError;

const EVAL_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Builds the unshaped environment described by `config`.
pub fn build_env(config: &EnvConfig, seed: u64) -> Result<GridWorld, HarnessError> {
    let mut env = match config.kind {
        EnvKind::ThreeRoom => three_room_env(seed),
        EnvKind::ShapingRooms => shaping_env(seed),
        EnvKind::Skill => skill_env(seed),
        EnvKind::ObstacleCourse => {
            let spec = config.course.clone().unwrap_or_else(CourseSpec::standard);
            obstacle_course_env(spec, seed).map_err(|e| HarnessError::Config(e.to_string()))?
        }
    };
    if let Some(h) = config.horizon {
        env.config_mut().horizon = h;
    }
    env.config_mut().slip = config.slip;
    Ok(env)
}

fn shaper(kind: ShapingKind, gamma: f64) -> PotentialShaper {
    match kind {
        ShapingKind::None => PotentialShaper::zero(gamma),
        ShapingKind::Gap => PotentialShaper::gap(gamma),
    }
}

/// Evaluation environment: an independent stream, optionally started elsewhere.
pub fn build_eval_env(config: &ExperimentConfig, seed: u64) -> Result<GridWorld, HarnessError> {
    let env = build_env(&config.env, seed.wrapping_add(EVAL_SEED_OFFSET))?;
    match config.eval.start {
        None => Ok(env),
        Some([x, y, h]) => env
            .shifted_eval(Pose::new(x, y, Dir::from_index(h)))
            .map_err(|e| HarnessError::Config(format!("eval.start: {e}"))),
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalResult {
    pub mean_return: f64,
    pub success_rate: f64,
    pub successes: usize,
    /// Mean return per skill scenario seen, in scenario order.
    pub scenarios: Vec<(&'static str, f64)>,
}

/// Runs `eval.episodes` episodes with `eval.epsilon`-greedy actions.
pub fn evaluate(agent: &Agent, env: &mut GridWorld, eval: &EvalConfig, rng: &mut ChaCha8Rng) -> EvalResult {
    let mut total = 0.0;
    let mut successes = 0;
    let mut per_scenario = vec![(0.0, 0usize); Skill::ALL.len()];
    for _ in 0..eval.episodes {
        let mut obs = env.reset();
        let scenario = env.scenario();
        let mut ret = 0.0;
        loop {
            let a = agent.act(&obs, eval.epsilon, rng);
            let step = env.step(a).expect("agent actions are in range");
            ret += step.reward;
            if step.done() {
                if step.terminated && step.obs.tile == Tile::Goal {
                    successes += 1;
                }
                break;
            }
            obs = step.obs;
        }
        total += ret;
        if let Some(k) = scenario {
            per_scenario[k].0 += ret;
            per_scenario[k].1 += 1;
        }
    }
    let n = eval.episodes as f64;
    EvalResult {
        mean_return: total / n,
        success_rate: successes as f64 / n,
        successes,
        scenarios: Skill::ALL
            .iter()
            .zip(&per_scenario)
            .filter(|(_, (_, c))| *c > 0)
            .map(|(s, (sum, c))| (s.name(), sum / *c as f64))
            .collect(),
    }
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Evaluation of the freshly initialized agent of `seed`, as training would start it.
pub fn initial_eval(config: &ExperimentConfig, seed: u64) -> Result<EvalResult, HarnessError> {
    let env = build_env(&config.env, seed)?;
    let mut eval_env = build_eval_env(config, seed)?;
    let mut rng = stream(seed, 1);
    let agent = Agent::new(&config.learner, env.layout().width, env.layout().height, env.n_actions(), &mut rng);
    Ok(evaluate(&agent, &mut eval_env, &config.eval, &mut stream(seed, 2)))
}

/// Metrics of one seed; a failed seed ends with a row whose status explains why.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<Vec<MetricsRow>, HarnessError> {
    let started = Instant::now();
    let run_id = format!("{}-s{seed}", config.name);
    let env = build_env(&config.env, seed)?;
    let mut eval_env = build_eval_env(config, seed)?;
    let (width, height) = (env.layout().width, env.layout().height);
    let n_actions = env.n_actions();
    let mut env = Shaped::new(env, shaper(config.env.shaping, config.learner.gamma));

    let mut rng = stream(seed, 1);
    let mut eval_rng = stream(seed, 2);
    let mut agent = Agent::new(&config.learner, width, height, n_actions, &mut rng);
    let mut sampler = Sampler::new(&config.sampler)?;
    let warmup = config.warmup.unwrap_or(config.learner.batch);
    let (spe, upe) = (config.steps_per_epoch, config.updates_per_epoch);

    let mut rows = Vec::with_capacity(config.epochs);
    let mut obs = env.reset();
    let mut ep_return = 0.0;
    let mut total_steps = 0usize;
    for epoch in 1..=config.epochs {
        let mut finished = Vec::new();
        let mut failure = None;
        'steps: for i in 0..spe {
            let a = agent.act(&obs, config.learner.epsilon, &mut rng);
            let step = env.step(a).map_err(|e| HarnessError::Run(e.to_string()))?;
            ep_return += env.env_reward();
            total_steps += 1;
            let done = step.done();
            let next = step.obs;
            sampler.insert(Transition::new(obs, a, step.reward, next.clone(), step.terminated));
            obs = if done {
                sampler.end_episode();
                finished.push(ep_return);
                ep_return = 0.0;
                env.reset()
            } else {
                next
            };

            let updates = (i + 1) * upe / spe - i * upe / spe;
            if total_steps < warmup || !sampler.ready() {
                continue;
            }
            for _ in 0..updates {
                let outcome = sampler
                    .sample(config.learner.batch, &mut rng)
                    .map_err(|e| e.to_string())
                    .and_then(|batch| {
                        let td = agent.train(&batch).map_err(|e| e.to_string())?;
                        sampler.report(&batch, &td).map_err(|e| e.to_string())
                    });
                if let Err(e) = outcome {
                    failure = Some(e);
                    break 'steps;
                }
            }
        }

        let stats = sampler.stats();
        let mut row = MetricsRow {
            run_id: run_id.clone(),
            seed,
            epoch,
            episodic_return: (!finished.is_empty()).then(|| finished.iter().sum::<f64>() / finished.len() as f64),
            episodes: finished.len(),
            eval_return: None,
            eval_success: None,
            sum_q: agent.sum_q(),
            table_sizes: join(stats.iter().map(|s| s.size)),
            table_inserts: join(stats.iter().map(|s| s.total_inserts)),
            scenario_returns: String::new(),
            status: "ok".into(),
            wall_time_s: 0.0,
        };
        if let Some(reason) = failure {
            row.status = format!("failed: {reason}");
            row.sum_q = None;
            row.wall_time_s = started.elapsed().as_secs_f64();
            rows.push(row);
            break;
        }
        if epoch % config.eval.every == 0 || epoch == config.epochs {
            let r = evaluate(&agent, &mut eval_env, &config.eval, &mut eval_rng);
            row.eval_return = Some(r.mean_return);
            row.eval_success = Some(r.success_rate);
            row.scenario_returns = join(r.scenarios.iter().map(|(n, v)| format!("{n}={v}")));
        }
        row.wall_time_s = started.elapsed().as_secs_f64();
        rows.push(row);
    }
    Ok(rows)
}

/// All seeds of `config`, in parallel, sorted by (seed, epoch).
pub fn run_rows(config: &ExperimentConfig) -> Result<Vec<MetricsRow>, HarnessError> {
    config.validate()?;
    let per_seed: Vec<Result<Vec<MetricsRow>, HarnessError>> =
        config.seeds.par_iter().map(|&seed| run_seed(config, seed)).collect();
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    rows.sort_by_key(|r| (r.seed, r.epoch));
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub rows: Vec<MetricsRow>,
    /// `(seed, status)` of every seed that stopped early.
    pub failures: Vec<(u64, String)>,
}

/// Runs every seed and writes `config.json` and `metrics.csv` into `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), config.to_json() + "\n")?;
    let rows = run_rows(config)?;
    write_metrics(&out.join("metrics.csv"), &rows)?;
    let failures = rows.iter().filter(|r| r.failed()).map(|r| (r.seed, r.status.clone())).collect();
    Ok(RunOutput { dir: out.to_path_buf(), rows, failures })
}
