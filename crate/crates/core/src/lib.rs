//! Stratified sampling from event tables for experience replay, with
//! reference learners, gridworld environments and numerical checks of the
//! oversampling and bias-correction results.

pub mod envs;
pub mod learners;
pub mod replay;
pub mod theory;
