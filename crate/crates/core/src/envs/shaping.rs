//! Potential-based reward shaping.

use std::fmt;
use std::sync::Arc;

use super::grid::{GridObs, GridWorld, Step, Tile};
use super::EnvError;

/// Adds `gamma * phi(s') - phi(s)` to every reward, with `phi(s') = 0` when
/// `s'` is terminal.
#[derive(Clone)]
pub struct PotentialShaper {
    phi: Arc<dyn Fn(&GridObs) -> f64 + Send + Sync>,
    pub gamma: f64,
}

impl PotentialShaper {
    pub fn new(gamma: f64, phi: impl Fn(&GridObs) -> f64 + Send + Sync + 'static) -> Self {
        Self { phi: Arc::new(phi), gamma }
    }

    /// Unit potential on gap cells.
    pub fn gap(gamma: f64) -> Self {
        Self::new(gamma, |o| if o.tile == Tile::Gap { 1.0 } else { 0.0 })
    }

    pub fn zero(gamma: f64) -> Self {
        Self::new(gamma, |_| 0.0)
    }

    pub fn phi(&self, obs: &GridObs) -> f64 {
        (self.phi)(obs)
    }

    pub fn term(&self, obs: &GridObs, next: &GridObs, terminal: bool) -> f64 {
        let ahead = if terminal { 0.0 } else { self.phi(next) };
        self.gamma * ahead - self.phi(obs)
    }
}

impl fmt::Debug for PotentialShaper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialShaper").field("gamma", &self.gamma).finish_non_exhaustive()
    }
}

/// A [`GridWorld`] whose rewards carry a shaping term.
#[derive(Debug, Clone)]
pub struct Shaped {
    pub env: GridWorld,
    pub shaper: PotentialShaper,
    last: Option<GridObs>,
    env_reward: f64,
}

impl Shaped {
    pub fn new(env: GridWorld, shaper: PotentialShaper) -> Self {
        Self { env, shaper, last: None, env_reward: 0.0 }
    }

    pub fn reset(&mut self) -> GridObs {
        let obs = self.env.reset();
        self.last = Some(obs.clone());
        obs
    }

    /// Steps the inner environment and returns the shaped step.
    pub fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        let prev = self.last.take().ok_or(EnvError::EpisodeOver)?;
        let mut step = self.env.step(action)?;
        self.env_reward = step.reward;
        step.reward += self.shaper.term(&prev, &step.obs, step.terminated);
        if !step.done() {
            self.last = Some(step.obs.clone());
        }
        Ok(step)
    }

    /// Unshaped reward of the last step.
    pub fn env_reward(&self) -> f64 {
        self.env_reward
    }
}
