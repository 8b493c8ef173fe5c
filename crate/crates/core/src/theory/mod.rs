//! Exact and Monte Carlo checks of the sampling theory behind event tables:
//! state densities and disparities, event classification, the oversampling
//! exponent and its Lambert-W form, bias correction and sample complexity.

mod checks;
mod dp;
mod events;
mod mdp;
mod rates;

use thiserror::Error;

use crate::replay::ReplayError;

pub use checks::{
    corridor_case, fill_buffer, state_events, verify_bias_correction, verify_oversampling, BiasReport, BiasSetup,
    OversamplingReport, OversamplingSetup, StateCheck, Verdict, MIN_DRAWS,
};
pub use dp::{
    density_from, disparity, greedy_action, propagate, state_density, state_marginals,
    value_iteration, DensityVector, ValueSolution, TIE_TOLERANCE,
};
pub use events::{behavior_mu, classify_events, EventAnalysis, EventReason, EventSet};
pub use mdp::{Outcome, Policy, TabularMdp};
pub use rates::{lambert_w0, m_asym, m_exact, sample_complexity, tau_bound};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("{got} draws requested, at least {min} needed")]
    InsufficientDraws { got: usize, min: usize },
    #[error(transparent)]
    Replay(#[from] ReplayError),
}
