//! Declarative experiment description, validated before any run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sset_core::envs::{CourseSpec, Predicate};
use sset_core::replay::{AllocationMode, BiasMode};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    ThreeRoom,
    ShapingRooms,
    ObstacleCourse,
    Skill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapingKind {
    #[default]
    None,
    /// Unit potential on gap cells.
    Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    /// Overrides the environment's default horizon.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub slip: f64,
    /// Obstacle-course layout; defaults to the six-room course.
    #[serde(default)]
    pub course: Option<CourseSpec>,
    /// Shaping applied to training rewards only.
    #[serde(default)]
    pub shaping: ShapingKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Tabular,
    Ddqn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub gamma: f64,
    pub epsilon: f64,
    pub batch: usize,
    /// Polyak rate of the target copy, applied after every update.
    pub refresh_rate: f64,
    /// Tabular step size.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Adam step size.
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub hidden: Option<Vec<usize>>,
    /// Global gradient-norm clip; 0 disables.
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
}

fn default_clip() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Uniform,
    Per,
    Sset,
    SsetPer,
    ReverseSweep,
}

impl SamplerKind {
    pub fn parse(name: &str) -> Result<Self, HarnessError> {
        serde_json::from_value(Value::String(name.to_string()))
            .map_err(|_| HarnessError::Config(format!("unknown sampler {name:?}")))
    }

    pub fn uses_events(self) -> bool {
        matches!(self, SamplerKind::Sset | SamplerKind::SsetPer)
    }

    pub fn uses_priorities(self) -> bool {
        matches!(self, SamplerKind::Per | SamplerKind::SsetPer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    /// Predicate name, e.g. `at-gap` or `reward-threshold(0.5)`.
    pub predicate: String,
    pub tau: usize,
    pub eta: f64,
    /// Table capacity; defaults to `capacity * eta`.
    #[serde(default)]
    pub kappa: Option<usize>,
    #[serde(default = "one")]
    pub d_min: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Total capacity. Event samplers give the default table `capacity * eta_0`,
    /// with `eta_0 = 1 - sum of event etas`.
    pub capacity: usize,
    /// Used only by the event samplers.
    #[serde(default)]
    pub events: Vec<EventConfig>,
    #[serde(default = "default_priority_exponent")]
    pub priority_exponent: f64,
    #[serde(default)]
    pub bias_mode: BiasMode,
    #[serde(default)]
    pub allocation: AllocationMode,
}

fn default_priority_exponent() -> f64 {
    0.65
}

impl SamplerConfig {
    pub fn default_eta(&self) -> f64 {
        if self.kind.uses_events() {
            1.0 - self.events.iter().map(|e| e.eta).sum::<f64>()
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluate after every `every`-th epoch (and after the last one).
    #[serde(default = "one")]
    pub every: usize,
    #[serde(default = "one")]
    pub episodes: usize,
    /// Start pose `[x, y, heading]` for evaluation episodes, heading 0..4 from east clockwise.
    #[serde(default)]
    pub start: Option<[usize; 3]>,
    #[serde(default)]
    pub epsilon: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { every: 1, episodes: 1, start: None, epsilon: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvConfig,
    pub learner: LearnerConfig,
    pub sampler: SamplerConfig,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    #[serde(default = "default_epoch_steps")]
    pub steps_per_epoch: usize,
    #[serde(default = "default_epoch_steps")]
    pub updates_per_epoch: usize,
    /// Environment steps collected before the first update; defaults to one batch.
    #[serde(default)]
    pub warmup: Option<usize>,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_epoch_steps() -> usize {
    500
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), HarnessError> {
    if ok {
        Ok(())
    } else {
        Err(HarnessError::Config(msg()))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        check(!self.name.is_empty(), || "name must not be empty".into())?;
        check(!self.seeds.is_empty(), || "seeds must not be empty".into())?;
        check(self.epochs >= 1, || "epochs must be at least 1".into())?;
        check(self.steps_per_epoch >= 1, || "steps_per_epoch must be at least 1".into())?;
        check(self.eval.every >= 1 && self.eval.episodes >= 1, || "eval.every and eval.episodes must be at least 1".into())?;
        check((0.0..=1.0).contains(&self.eval.epsilon), || "eval.epsilon must lie in [0, 1]".into())?;
        check((0.0..=1.0).contains(&self.env.slip), || "env.slip must lie in [0, 1]".into())?;
        if let Some([_, _, h]) = self.eval.start {
            check(h < 4, || format!("eval.start heading {h} must be below 4"))?;
        }

        let l = &self.learner;
        check(l.gamma > 0.0 && l.gamma < 1.0, || format!("learner.gamma {} must lie in (0, 1)", l.gamma))?;
        check((0.0..=1.0).contains(&l.epsilon), || format!("learner.epsilon {} must lie in [0, 1]", l.epsilon))?;
        check(l.batch >= 1, || "learner.batch must be at least 1".into())?;
        check(l.refresh_rate > 0.0 && l.refresh_rate <= 1.0, || "learner.refresh_rate must lie in (0, 1]".into())?;
        match l.kind {
            LearnerKind::Tabular => {
                let a = l.alpha.ok_or_else(|| HarnessError::Config("tabular learner needs alpha".into()))?;
                check(a > 0.0 && a <= 1.0, || format!("learner.alpha {a} must lie in (0, 1]"))?;
                check(l.learning_rate.is_none() && l.hidden.is_none(), || "tabular learner takes no learning_rate or hidden".into())?;
            }
            LearnerKind::Ddqn => {
                let lr = l.learning_rate.ok_or_else(|| HarnessError::Config("ddqn learner needs learning_rate".into()))?;
                check(lr > 0.0, || "learner.learning_rate must be positive".into())?;
                let hidden = l.hidden.as_ref().ok_or_else(|| HarnessError::Config("ddqn learner needs hidden".into()))?;
                check(!hidden.is_empty() && hidden.iter().all(|&h| h > 0), || "learner.hidden needs positive widths".into())?;
                check(l.alpha.is_none(), || "ddqn learner takes no alpha".into())?;
            }
        }

        let s = &self.sampler;
        check(s.capacity >= 1, || "sampler.capacity must be at least 1".into())?;
        check(s.priority_exponent >= 0.0 && s.priority_exponent.is_finite(), || "sampler.priority_exponent must be non-negative".into())?;
        for e in &s.events {
            Predicate::parse(&e.predicate).map_err(|err| HarnessError::Config(err.to_string()))?;
            check(e.tau >= 1, || format!("event {}: tau must be at least 1", e.predicate))?;
            check((0.0..=1.0).contains(&e.eta), || format!("event {}: eta must lie in [0, 1]", e.predicate))?;
        }
        if s.kind.uses_events() {
            let eta0 = s.default_eta();
            check(eta0 > 0.0 && eta0 <= 1.0, || format!("event etas leave default eta {eta0}, need (0, 1]"))?;
        }
        check(
            s.bias_mode == BiasMode::None || l.kind == LearnerKind::Tabular || s.bias_mode == BiasMode::SumTree,
            || "discrete-count bias mode needs the tabular learner".into(),
        )?;
        if self.env.course.is_some() {
            check(self.env.kind == EnvKind::ObstacleCourse, || "env.course applies to obstacle-course only".into())?;
        }
        Ok(())
    }

    /// Sets the value at a dotted path such as `sampler.events.0.eta`, then revalidates.
    pub fn with_path(&self, path: &str, value: Value) -> Result<Self, HarnessError> {
        let mut root = serde_json::to_value(self).expect("config serializes");
        let mut cur = &mut root;
        for part in path.split('.') {
            cur = match cur {
                Value::Object(map) => map
                    .get_mut(part)
                    .ok_or_else(|| HarnessError::Config(format!("axis {path:?}: no field {part:?}")))?,
                Value::Array(items) => {
                    let i: usize = part
                        .parse()
                        .map_err(|_| HarnessError::Config(format!("axis {path:?}: {part:?} is not an index")))?;
                    let len = items.len();
                    items
                        .get_mut(i)
                        .ok_or_else(|| HarnessError::Config(format!("axis {path:?}: index {i} beyond {len}")))?
                }
                _ => return Err(HarnessError::Config(format!("axis {path:?}: {part:?} is inside a scalar"))),
            };
        }
        *cur = value;
        let config: Self = serde_json::from_value(root).map_err(|e| HarnessError::Config(format!("axis {path:?}: {e}")))?;
        config.validate()?;
        Ok(config)
    }
}

/// Parses a command-line value as JSON, falling back to a plain string.
pub fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}
