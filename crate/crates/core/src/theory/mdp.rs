//! Finite episodic MDPs with sparse transition rows.

use rand::Rng;

use super::TheoryError;

/// One possible successor of a state-action pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// A finite MDP with horizon `horizon`. Terminal states trap the agent: their
/// only outcome is a self-loop, so exact recursions need no special casing.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    outcomes: Vec<Vec<Outcome>>,
    pub terminal: Vec<bool>,
    pub initial: Vec<f64>,
    pub horizon: usize,
    pub gamma: f64,
}

impl TabularMdp {
    /// An MDP with no transitions yet; every row must be filled before use.
    pub fn new(n_states: usize, n_actions: usize, gamma: f64, horizon: usize) -> Self {
        Self {
            n_states,
            n_actions,
            outcomes: vec![Vec::new(); n_states * n_actions],
            terminal: vec![false; n_states],
            initial: vec![0.0; n_states],
            horizon,
            gamma,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Adds probability mass to `s -a-> next`, merging with an existing entry
    /// for the same successor (the reward of the first entry is kept).
    pub fn add_outcome(&mut self, s: usize, a: usize, next: usize, prob: f64, reward: f64) {
        let row = &mut self.outcomes[s * self.n_actions + a];
        match row.iter_mut().find(|o| o.next == next) {
            Some(o) => o.prob += prob,
            None => row.push(Outcome { next, prob, reward }),
        }
    }

    /// Sets the reward of every outcome of `(s, a)`.
    pub fn set_reward(&mut self, s: usize, a: usize, reward: f64) {
        for o in &mut self.outcomes[s * self.n_actions + a] {
            o.reward = reward;
        }
    }

    /// Turns `s` into an absorbing state paying `trap_reward` per step.
    pub fn make_terminal(&mut self, s: usize, trap_reward: f64) {
        self.terminal[s] = true;
        for a in 0..self.n_actions {
            self.outcomes[s * self.n_actions + a] = vec![Outcome {
                next: s,
                prob: 1.0,
                reward: trap_reward,
            }];
        }
    }

    pub fn outcomes(&self, s: usize, a: usize) -> &[Outcome] {
        &self.outcomes[s * self.n_actions + a]
    }

    /// Expected one-step reward of `(s, a)`.
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.outcomes(s, a).iter().map(|o| o.prob * o.reward).sum()
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// Checks row-stochasticity, the initial distribution and the unit reward range.
    pub fn validate(&self) -> Result<(), TheoryError> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(TheoryError::InvalidMdp("empty state or action set".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(TheoryError::InvalidMdp(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.outcomes(s, a);
                let mass: f64 = row.iter().map(|o| o.prob).sum();
                if (mass - 1.0).abs() > 1e-12 {
                    return Err(TheoryError::InvalidMdp(format!(
                        "P(.|{s},{a}) sums to {mass}"
                    )));
                }
                if row.iter().any(|o| o.prob < 0.0 || o.next >= self.n_states) {
                    return Err(TheoryError::InvalidMdp(format!("bad outcome in row ({s},{a})")));
                }
                if row.iter().any(|o| !(0.0..=1.0).contains(&o.reward)) {
                    return Err(TheoryError::InvalidMdp(format!(
                        "reward of ({s},{a}) outside [0, 1]"
                    )));
                }
            }
        }
        let init: f64 = self.initial.iter().sum();
        if (init - 1.0).abs() > 1e-12 || self.initial.iter().any(|p| *p < 0.0) {
            return Err(TheoryError::InvalidMdp(format!("initial distribution sums to {init}")));
        }
        Ok(())
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(self.initial.iter().copied(), rng).unwrap_or(0)
    }

    /// Samples a successor; returns `(next, reward)`.
    pub fn sample_step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (usize, f64) {
        let row = self.outcomes(s, a);
        let i = sample_index(row.iter().map(|o| o.prob), rng).unwrap_or(0);
        (row[i].next, row[i].reward)
    }

    /// States with positive initial probability.
    pub fn initial_support(&self) -> Vec<usize> {
        (0..self.n_states).filter(|&s| self.initial[s] > 0.0).collect()
    }

    /// A corridor of `len` cells: action 0 moves left (blocked at cell 0),
    /// action 1 moves right. The last cell is an absorbing goal reached with
    /// reward 1; every other step pays 0. Episodes start in cell 0.
    pub fn corridor(len: usize, gamma: f64, horizon: usize) -> Self {
        let mut mdp = Self::new(len, 2, gamma, horizon);
        for s in 0..len - 1 {
            mdp.add_outcome(s, 0, s.saturating_sub(1), 1.0, 0.0);
            let right = s + 1;
            mdp.add_outcome(s, 1, right, 1.0, if right == len - 1 { 1.0 } else { 0.0 });
        }
        mdp.make_terminal(len - 1, 0.0);
        mdp.initial[0] = 1.0;
        mdp
    }

    /// One decision state whose single action ends the episode in state 1
    /// (reward 1) or state 2 (reward 0) with equal probability.
    pub fn two_outcome(gamma: f64) -> Self {
        let mut mdp = Self::new(3, 1, gamma, 1);
        mdp.add_outcome(0, 0, 1, 0.5, 1.0);
        mdp.add_outcome(0, 0, 2, 0.5, 0.0);
        mdp.make_terminal(1, 0.0);
        mdp.make_terminal(2, 0.0);
        mdp.initial[0] = 1.0;
        mdp
    }

    /// A random MDP with `branching` successors per row and uniform rewards.
    pub fn random<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        branching: usize,
        gamma: f64,
        horizon: usize,
        rng: &mut R,
    ) -> Self {
        let mut mdp = Self::new(n_states, n_actions, gamma, horizon);
        for s in 0..n_states {
            for a in 0..n_actions {
                let weights: Vec<f64> = (0..branching).map(|_| rng.gen::<f64>() + 0.05).collect();
                let total: f64 = weights.iter().sum();
                let reward = rng.gen::<f64>();
                for w in weights {
                    mdp.add_outcome(s, a, rng.gen_range(0..n_states), w / total, reward);
                }
            }
        }
        mdp.initial[0] = 1.0;
        mdp
    }
}

/// Stochastic policy stored as a dense `|S| x |A|` table.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self { n_actions, probs }
    }

    /// Greedy action with probability `1 - eps`, uniform otherwise.
    pub fn epsilon_greedy(actions: &[usize], n_actions: usize, eps: f64) -> Self {
        let mut p = Self::uniform(actions.len(), n_actions);
        for v in &mut p.probs {
            *v *= eps;
        }
        for (s, &a) in actions.iter().enumerate() {
            p.probs[s * n_actions + a] += 1.0 - eps;
        }
        p
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TheoryError> {
        let n_actions = rows.first().map_or(0, Vec::len);
        for (s, row) in rows.iter().enumerate() {
            let mass: f64 = row.iter().sum();
            if row.len() != n_actions || (mass - 1.0).abs() > 1e-12 || row.iter().any(|p| *p < 0.0)
            {
                return Err(TheoryError::InvalidPolicy(format!("row {s} is not a distribution")));
            }
        }
        Ok(Self {
            n_actions,
            probs: rows.concat(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions.max(1)
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_index(self.row(s).iter().copied(), rng).unwrap_or(0)
    }
}

/// Inverse-CDF draw from unnormalized non-negative weights.
fn sample_index<R: Rng + ?Sized>(weights: impl Iterator<Item = f64> + Clone, rng: &mut R) -> Option<usize> {
    let total: f64 = weights.clone().sum();
    if total <= 0.0 {
        return None;
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if u < acc {
            return Some(i);
        }
    }
    last
}
