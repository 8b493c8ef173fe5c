//! Exact dynamic programming: value iteration and finite-horizon state densities.

use super::mdp::{Policy, TabularMdp};

/// Q-values are treated as tied when within this distance of the maximum.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ValueSolution {
    /// Row-major `|S| x |A|`.
    pub q: Vec<f64>,
    /// Greedy action per state, lowest index among ties.
    pub greedy: Vec<usize>,
    /// Sup-norm Bellman residual of `q`.
    pub residual: f64,
    pub iterations: usize,
}

impl ValueSolution {
    pub fn q(&self, n_actions: usize, s: usize, a: usize) -> f64 {
        self.q[s * n_actions + a]
    }

    pub fn policy(&self, n_actions: usize) -> Policy {
        Policy::deterministic(&self.greedy, n_actions)
    }
}

/// Lowest action whose value is within [`TIE_TOLERANCE`] of the row maximum.
pub fn greedy_action(row: &[f64]) -> usize {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOLERANCE * best.abs().max(1.0);
    row.iter().position(|&q| q >= best - tol).unwrap_or(0)
}

fn bellman(mdp: &TabularMdp, q: &[f64], out: &mut [f64]) {
    let na = mdp.n_actions();
    let v: Vec<f64> = q
        .chunks(na)
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    for s in 0..mdp.n_states() {
        for a in 0..na {
            out[s * na + a] = mdp
                .outcomes(s, a)
                .iter()
                .map(|o| o.prob * (o.reward + mdp.gamma * v[o.next]))
                .sum();
        }
    }
}

/// Iterates the optimal Bellman operator from `Q = 0` until the sup-norm
/// residual drops below `tolerance`.
pub fn value_iteration(mdp: &TabularMdp, tolerance: f64) -> ValueSolution {
    let n = mdp.n_states() * mdp.n_actions();
    let mut q = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let residual = loop {
        bellman(mdp, &q, &mut next);
        iterations += 1;
        let r = q
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut q, &mut next);
        if r < tolerance {
            bellman(mdp, &q, &mut next);
            break q.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        }
    };
    let greedy = q.chunks(mdp.n_actions()).map(greedy_action).collect();
    ValueSolution {
        q,
        greedy,
        residual,
        iterations,
    }
}

/// Pushes a state distribution one step forward under `policy`.
pub fn propagate(mdp: &TabularMdp, policy: &Policy, dist: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dist.len()];
    for (s, &p) in dist.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (a, &pa) in policy.row(s).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for o in mdp.outcomes(s, a) {
                out[o.next] += p * pa * o.prob;
            }
        }
    }
    out
}

/// Distribution of `s_k` for `k = 0..=horizon`, starting from `start`.
pub fn state_marginals(mdp: &TabularMdp, policy: &Policy, start: &[f64], horizon: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(start.to_vec());
    for k in 0..horizon {
        let next = propagate(mdp, policy, &out[k]);
        out.push(next);
    }
    out
}

/// Time-averaged visitation distribution over `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    pub rho: Vec<f64>,
    /// Normalizer `C = K + 1`.
    pub normalizer: f64,
}

impl DensityVector {
    pub fn total(&self) -> f64 {
        self.rho.iter().sum()
    }
}

/// Density of `policy` from an arbitrary start distribution.
pub fn density_from(mdp: &TabularMdp, policy: &Policy, start: &[f64], horizon: usize) -> DensityVector {
    let mut acc = vec![0.0; start.len()];
    let mut dist = start.to_vec();
    for k in 0..=horizon {
        for (a, d) in acc.iter_mut().zip(&dist) {
            *a += d;
        }
        if k < horizon {
            dist = propagate(mdp, policy, &dist);
        }
    }
    let normalizer = (horizon + 1) as f64;
    for a in &mut acc {
        *a /= normalizer;
    }
    DensityVector { rho: acc, normalizer }
}

/// Density of `policy` started deterministically in `s0`.
pub fn state_density(mdp: &TabularMdp, policy: &Policy, s0: usize, horizon: usize) -> DensityVector {
    let mut start = vec![0.0; mdp.n_states()];
    start[s0] = 1.0;
    density_from(mdp, policy, &start, horizon)
}

/// Per-state `rho_opt - rho_behavior` from `s0`.
pub fn disparity(
    mdp: &TabularMdp,
    behavior: &Policy,
    optimal: &Policy,
    s0: usize,
    horizon: usize,
) -> Vec<f64> {
    let opt = state_density(mdp, optimal, s0, horizon);
    let beh = state_density(mdp, behavior, s0, horizon);
    opt.rho.iter().zip(&beh.rho).map(|(a, b)| a - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state(r: f64, gamma: f64) -> TabularMdp {
        let mut m = TabularMdp::new(1, 1, gamma, 10);
        m.add_outcome(0, 0, 0, 1.0, r);
        m.initial[0] = 1.0;
        m
    }

    #[test]
    fn geometric_series_fixed_point() {
        let sol = value_iteration(&single_state(1.0, 0.5), 1e-12);
        assert!((sol.q[0] - 2.0).abs() < 1e-11);
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn single_state_density_is_one() {
        let m = single_state(1.0, 0.5);
        for k in [0, 1, 7] {
            let d = state_density(&m, &Policy::uniform(1, 1), 0, k);
            assert_eq!(d.rho, vec![1.0]);
        }
    }

    #[test]
    fn two_cycle_splits_evenly() {
        let mut m = TabularMdp::new(2, 1, 0.9, 1);
        m.add_outcome(0, 0, 1, 1.0, 0.0);
        m.add_outcome(1, 0, 0, 1.0, 0.0);
        let d = state_density(&m, &Policy::uniform(2, 1), 0, 1);
        assert_eq!(d.rho, vec![0.5, 0.5]);
        assert_eq!(d.normalizer, 2.0);
    }

    #[test]
    fn greedy_ties_prefer_lower_action() {
        assert_eq!(greedy_action(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(greedy_action(&[2.0, 2.0 + 1e-12]), 0);
        assert_eq!(greedy_action(&[0.0, 1e-6]), 1);
    }

    #[test]
    fn optimal_behavior_has_zero_disparity() {
        let m = TabularMdp::corridor(5, 0.9, 12);
        let opt = value_iteration(&m, 1e-12).policy(2);
        let d = disparity(&m, &opt, &opt, 0, 12);
        assert!(d.iter().all(|x| *x == 0.0));
    }
}
