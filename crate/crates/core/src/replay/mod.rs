//! Event tables: a default FIFO table plus one FIFO per event spec, sampled
//! with fixed per-table proportions.
//!
//! Every transition goes to the default table. When an event condition fires
//! on a step, that step and the preceding steps of the open episode (up to the
//! spec's history length, and never ones already sent for an earlier
//! occurrence) are also appended to the event's table. Tables share the stored
//! transitions through reference counting, so evicting from one table never
//! invalidates another.

mod allocation;
mod buffer;
mod shared;
mod sum_tree;
mod sweep;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use allocation::{largest_remainder, renormalize, AllocationMode};
pub use buffer::{
    BufferConfig, LeafId, PairCounts, ReplayBuffer, SampledBatch, SampledItem, TableStats,
};
pub use shared::SharedReplayBuffer;
pub use sum_tree::SumTree;
pub use sweep::ReverseSweep;

/// Floor added to |TD error| before exponentiation.
pub const PRIORITY_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("expected {expected} table configs (default + {events} events), got {got}")]
    TableCount {
        expected: usize,
        events: usize,
        got: usize,
    },
    #[error("table etas sum to {0}, expected 1")]
    EtaSum(f64),
    #[error("table {table}: eta {eta} outside [0, 1]")]
    EtaRange { table: usize, eta: f64 },
    #[error("table {0}: capacity must be at least 1")]
    ZeroCapacity(usize),
    #[error("table {table}: d_min {d_min} exceeds capacity {kappa}")]
    DminAboveCapacity { table: usize, d_min: usize, kappa: usize },
    #[error("event spec {0:?}: history length must be at least 1")]
    ZeroTau(String),
    #[error("priority exponent must be finite and non-negative, got {0}")]
    PriorityExponent(f64),
    #[error("batch size must be positive")]
    ZeroBatch,
    #[error("default table is empty")]
    EmptyDefaultTable,
    #[error("unknown leaf: {0}")]
    UnknownLeaf(String),
    #[error("invalid priority {0}")]
    InvalidPriority(f64),
    #[error("bias weights need discrete-count mode")]
    BiasModeMismatch,
    #[error("state-action pair ({0}, {1}) has not been observed")]
    UnseenPair(usize, usize),
}

/// States that can be stored in the buffer. Discrete states expose an id,
/// which the discrete-count bias correction keys on.
pub trait ReplayState: Clone + Send + Sync + 'static {
    fn discrete_key(&self) -> Option<usize> {
        None
    }
}

impl ReplayState for usize {
    fn discrete_key(&self) -> Option<usize> {
        Some(*self)
    }
}

impl ReplayState for Vec<f32> {}
impl ReplayState for Vec<f64> {}

/// One environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition<S> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub next_state: S,
    /// True termination (not a time-limit cut).
    pub done: bool,
    pub episode_id: u64,
    /// Position within the episode, assigned by the buffer on insert.
    pub step_index: u64,
}

impl<S> Transition<S> {
    pub fn new(state: S, action: usize, reward: f64, next_state: S, done: bool) -> Self {
        Self {
            state,
            action,
            reward,
            next_state,
            done,
            episode_id: 0,
            step_index: 0,
        }
    }
}

/// The open episode's transitions preceding the step being tested.
pub struct EpisodeView<'a, S> {
    entries: &'a [Arc<buffer::Entry<S>>],
}

impl<S> Clone for EpisodeView<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<S> Copy for EpisodeView<'_, S> {}

impl<'a, S> EpisodeView<'a, S> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&'a Transition<S>> {
        self.entries.get(i).map(|e| &e.transition)
    }

    /// Most recent transition first.
    pub fn iter_back(&self) -> impl Iterator<Item = &'a Transition<S>> + 'a {
        self.entries.iter().rev().map(|e| &e.transition)
    }
}

/// A deterministic predicate on a step and the open episode's history.
pub trait EventCondition<S>: Send + Sync {
    fn holds(&self, step: &Transition<S>, history: EpisodeView<'_, S>) -> bool;
}

impl<S, F> EventCondition<S> for F
where
    F: Fn(&Transition<S>, EpisodeView<'_, S>) -> bool + Send + Sync,
{
    fn holds(&self, step: &Transition<S>, history: EpisodeView<'_, S>) -> bool {
        self(step, history)
    }
}

/// An event condition paired with the number of steps of history it captures.
pub struct EventSpec<S> {
    pub name: String,
    pub tau: usize,
    pub condition: Arc<dyn EventCondition<S>>,
}

impl<S> EventSpec<S> {
    pub fn new(name: impl Into<String>, tau: usize, condition: impl EventCondition<S> + 'static) -> Self {
        Self {
            name: name.into(),
            tau,
            condition: Arc::new(condition),
        }
    }
}

impl<S> Clone for EventSpec<S> {
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            tau: self.tau,
            condition: Arc::clone(&self.condition),
        }
    }
}

impl<S> fmt::Debug for EventSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventSpec")
            .field("name", &self.name)
            .field("tau", &self.tau)
            .finish_non_exhaustive()
    }
}

/// Sampling probability, capacity and minimum fill of one table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub eta: f64,
    pub kappa: usize,
    pub d_min: usize,
}

impl TableConfig {
    pub fn new(eta: f64, kappa: usize, d_min: usize) -> Self {
        Self { eta, kappa, d_min }
    }
}

/// Importance weighting applied to sampled items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasMode {
    #[default]
    None,
    /// Counts how often each (s, a) lands inside vs. outside event histories.
    DiscreteCount,
    /// Experimental: (1 ± eta) priorities over the default table.
    SumTree,
}
