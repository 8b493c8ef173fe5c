//! Tabular Q-learning against a frozen or slowly refreshed target table.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, LearnerError};
use crate::replay::{ReplayBuffer, SampledBatch, Transition};

/// Dense `|S| x |A|` action-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy(&self, s: usize) -> usize {
        argmax(self.row(s))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum over every state-action entry.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `self <- (1 - rate) self + rate other`.
    pub fn blend_from(&mut self, other: &QTable, rate: f64) {
        for (t, o) in self.values.iter_mut().zip(&other.values) {
            *t += rate * (o - *t);
        }
    }

    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Step sizes `alpha / (lambda + t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizeSchedule {
    pub alpha: f64,
    pub lambda: f64,
}

impl StepSizeSchedule {
    /// Rejects schedules whose first step exceeds 1.
    pub fn new(alpha: f64, lambda: f64) -> Result<Self, LearnerError> {
        if !(alpha > 0.0 && lambda > 0.0 && alpha <= lambda) {
            return Err(LearnerError::InvalidSchedule { alpha, lambda });
        }
        Ok(Self { alpha, lambda })
    }

    /// Constant step `alpha`, expressed as the `lambda -> inf` limit.
    pub fn constant(alpha: f64) -> Result<Self, LearnerError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(LearnerError::InvalidSchedule { alpha, lambda: f64::INFINITY });
        }
        Ok(Self { alpha, lambda: f64::INFINITY })
    }

    pub fn rate(&self, t: u64) -> f64 {
        if self.lambda.is_infinite() {
            self.alpha
        } else {
            self.alpha / (self.lambda + t as f64)
        }
    }
}

/// One Q-learning update of `q[s, a]` towards `r + gamma max q_target[s', .]`.
/// Terminal transitions bootstrap from 0. Returns the new entry.
pub fn q_update(q: &mut QTable, target: &QTable, t: &Transition<usize>, gamma: f64, alpha: f64) -> f64 {
    let bootstrap = if t.done { 0.0 } else { target.max(t.next_state) };
    let old = q.get(t.state, t.action);
    let new = old + alpha * (t.reward + gamma * bootstrap - old);
    q.set(t.state, t.action, new);
    new
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetQConfig {
    pub outer: usize,
    pub inner: usize,
    pub schedule: StepSizeSchedule,
    pub gamma: f64,
    /// Transitions per inner step; each gets its own update at the same step size.
    pub batch: usize,
}

/// Target Q-learning over a pre-filled buffer: `outer` rounds, each running
/// `inner` sampled updates against the previous round's table. The step-size
/// index restarts every round.
pub fn target_q_learning<R: Rng + ?Sized>(
    buffer: &mut ReplayBuffer<usize>,
    n_states: usize,
    n_actions: usize,
    config: &TargetQConfig,
    rng: &mut R,
) -> Result<QTable, LearnerError> {
    let mut q = QTable::zeros(n_states, n_actions);
    if config.outer == 0 {
        return Ok(q);
    }
    if buffer.is_empty() {
        return Err(LearnerError::EmptyBuffer);
    }
    let batch = config.batch.max(1);
    for _ in 0..config.outer {
        let target = q.clone();
        for i in 0..config.inner {
            let alpha = config.schedule.rate(i as u64);
            for item in buffer.sample_batch(batch, rng)?.items {
                q_update(&mut q, &target, item.transition(), config.gamma, alpha);
            }
        }
    }
    Ok(q)
}

/// Online tabular agent: a Q table trained on replay batches against a
/// Polyak-averaged target table.
#[derive(Debug, Clone)]
pub struct TabularAgent {
    pub q: QTable,
    pub target: QTable,
    pub alpha: f64,
    pub gamma: f64,
    pub refresh_rate: f64,
}

impl TabularAgent {
    pub fn new(n_states: usize, n_actions: usize, alpha: f64, gamma: f64, refresh_rate: f64) -> Self {
        Self {
            q: QTable::zeros(n_states, n_actions),
            target: QTable::zeros(n_states, n_actions),
            alpha,
            gamma,
            refresh_rate,
        }
    }

    /// Applies one importance-weighted update per item, then refreshes the
    /// target. Returns the absolute TD error of each item before its update.
    pub fn train_batch(&mut self, batch: &SampledBatch<usize>) -> Vec<f64> {
        self.train_batch_with(batch, |s| *s)
    }

    /// [`train_batch`](Self::train_batch) for any state type, given its table index.
    pub fn train_batch_with<S>(&mut self, batch: &SampledBatch<S>, index: impl Fn(&S) -> usize) -> Vec<f64> {
        let mut errors = Vec::with_capacity(batch.items.len());
        for item in &batch.items {
            let t = item.transition();
            let (s, s2) = (index(&t.state), index(&t.next_state));
            let bootstrap = if t.done { 0.0 } else { self.target.max(s2) };
            let old = self.q.get(s, t.action);
            let delta = t.reward + self.gamma * bootstrap - old;
            let step = (self.alpha * item.weight).min(1.0);
            self.q.set(s, t.action, old + step * delta);
            errors.push(delta.abs());
        }
        self.refresh_target();
        errors
    }

    pub fn refresh_target(&mut self) {
        self.target.blend_from(&self.q, self.refresh_rate);
    }

    pub fn greedy(&self, s: usize) -> usize {
        self.q.greedy(s)
    }
}
