//! Classification of event states from exact densities.
//!
//! A state is an event state when, from some anchor (an initial state or an
//! already classified event state), the optimal policy visits it at least
//! `1 - mu` more often than the behavior policy does over the horizon, or when
//! the optimal policy is still in it at the horizon. The anchor quantifier
//! admits many decompositions; [`classify_events`] returns the one produced by
//! a breadth-first pass over anchors in ascending state order.

use std::collections::VecDeque;

use super::dp::{density_from, disparity, state_marginals, value_iteration};
use super::mdp::{Policy, TabularMdp};
use super::TheoryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventReason {
    /// Disparity from the anchor state reached the threshold.
    Disparity { anchor: usize },
    /// Occupied by the optimal policy at the horizon.
    OptimalTerminal,
}

#[derive(Debug, Clone)]
pub struct EventSet {
    pub states: Vec<usize>,
    pub reason: EventReason,
}

#[derive(Debug, Clone)]
pub struct EventAnalysis {
    pub mu: f64,
    pub delta: f64,
    pub sets: Vec<EventSet>,
    /// States from which the optimal policy sits at the horizon, from the initial distribution.
    pub optimal_terminal: Vec<usize>,
    /// One section per set.
    pub sections: Vec<Vec<usize>>,
    /// Largest disparity of each state over all anchors tried.
    pub max_disparity: Vec<f64>,
}

impl EventAnalysis {
    pub fn is_event(&self, s: usize) -> bool {
        self.sets.iter().any(|set| set.states.contains(&s))
    }

    /// Initial, event and optimal-terminal states all lie in some section.
    pub fn sections_cover(&self, mdp: &TabularMdp) -> bool {
        let covered = |s: usize| self.sections.iter().any(|sec| sec.contains(&s));
        mdp.initial_support().into_iter().all(covered)
            && self.sets.iter().flat_map(|set| set.states.iter()).all(|&s| covered(s))
            && self.optimal_terminal.iter().all(|&s| covered(s))
    }
}

fn point(n: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

/// Classifies event states for `behavior` at threshold `mu`, with the
/// optimal policy obtained by value iteration.
pub fn classify_events(mdp: &TabularMdp, behavior: &Policy, mu: f64) -> Result<EventAnalysis, TheoryError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(TheoryError::Domain(format!("mu must lie in (0, 1), got {mu}")));
    }
    mdp.validate()?;
    let n = mdp.n_states();
    let horizon = mdp.horizon;
    let delta = 1.0 - mu;
    let optimal = value_iteration(mdp, 1e-10).policy(mdp.n_actions());

    // Disparities and optimal-at-horizon distributions from every state.
    let disp: Vec<Vec<f64>> = (0..n)
        .map(|s| disparity(mdp, behavior, &optimal, s, horizon))
        .collect();
    let reaches_at_horizon: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            state_marginals(mdp, &optimal, &point(n, s), horizon)
                .pop()
                .unwrap_or_default()
        })
        .collect();

    let mut classified = vec![false; n];
    let mut sets = Vec::new();
    let mut queue: VecDeque<usize> = mdp.initial_support().into();
    let mut tried = vec![false; n];
    while let Some(anchor) = queue.pop_front() {
        if std::mem::replace(&mut tried[anchor], true) {
            continue;
        }
        let fresh: Vec<usize> = (0..n)
            .filter(|&s| !classified[s] && disp[anchor][s] >= delta)
            .collect();
        if fresh.is_empty() {
            continue;
        }
        for &s in &fresh {
            classified[s] = true;
            queue.push_back(s);
        }
        sets.push(EventSet {
            states: fresh,
            reason: EventReason::Disparity { anchor },
        });
    }

    let at_horizon = state_marginals(mdp, &optimal, &mdp.initial, horizon)
        .pop()
        .unwrap_or_default();
    let optimal_terminal: Vec<usize> = (0..n).filter(|&s| at_horizon[s] > 0.0).collect();
    let terminal_fresh: Vec<usize> = optimal_terminal
        .iter()
        .copied()
        .filter(|&s| !classified[s])
        .collect();
    if !terminal_fresh.is_empty() {
        sets.push(EventSet {
            states: terminal_fresh,
            reason: EventReason::OptimalTerminal,
        });
    }

    let sections = sets
        .iter()
        .map(|set| {
            (0..n)
                .filter(|&s| {
                    set.states.contains(&s)
                        || set.states.iter().any(|&e| disp[s][e] >= delta)
                        || (set.reason == EventReason::OptimalTerminal
                            && set.states.iter().any(|&e| reaches_at_horizon[s][e] > 0.0))
                })
                .collect()
        })
        .collect();

    let max_disparity = (0..n)
        .map(|s| {
            (0..n)
                .map(|a| disp[a][s])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();

    Ok(EventAnalysis {
        mu,
        delta,
        sets,
        optimal_terminal,
        sections,
        max_disparity,
    })
}

/// Largest behavior-policy density over `states`, from the initial distribution.
pub fn behavior_mu(mdp: &TabularMdp, behavior: &Policy, states: &[usize]) -> f64 {
    let d = density_from(mdp, behavior, &mdp.initial, mdp.horizon);
    states.iter().map(|&s| d.rho[s]).fold(0.0, f64::max)
}
