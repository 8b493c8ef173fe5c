//! Off-policy learners that consume a replay buffer: exact tabular target
//! Q-learning and a small double-DQN value network.

mod mlp;
mod tabular;

use rand::Rng;
use thiserror::Error;

use crate::replay::ReplayError;

pub use mlp::{ddqn_step, Adam, DdqnSample, Mlp, MlpValueNet, StepOutcome};
pub use tabular::{q_update, target_q_learning, QTable, StepSizeSchedule, TabularAgent, TargetQConfig};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid step-size schedule alpha={alpha}, lambda={lambda}: need 0 < alpha <= lambda")]
    InvalidSchedule { alpha: f64, lambda: f64 },
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("empty training batch")]
    EmptyBatch,
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Uniform action with probability `epsilon`, otherwise [`argmax`].
pub fn epsilon_greedy<R: Rng + ?Sized>(values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..values.len())
    } else {
        argmax(values)
    }
}
