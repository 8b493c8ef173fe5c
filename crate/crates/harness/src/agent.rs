//! Learners behind one interface: act on a [`GridObs`], train on a replay batch.

use rand::Rng;
use sset_core::envs::{GridObs, ObsEncoder};
use sset_core::learners::{
    ddqn_step, epsilon_greedy, DdqnSample, LearnerError, MlpValueNet, TabularAgent,
};
use sset_core::replay::SampledBatch;

use crate::config::{LearnerConfig, LearnerKind};

pub enum Agent {
    Tabular(TabularAgent),
    Ddqn {
        net: MlpValueNet,
        encoder: ObsEncoder,
        learning_rate: f64,
        gamma: f64,
        refresh_rate: f64,
    },
}

impl Agent {
    /// `width x height` is the grid the observations come from.
    pub fn new<R: Rng + ?Sized>(
        config: &LearnerConfig,
        width: usize,
        height: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Self {
        match config.kind {
            LearnerKind::Tabular => Agent::Tabular(TabularAgent::new(
                GridObs::id_space(width, height),
                n_actions,
                config.alpha.expect("validated config"),
                config.gamma,
                config.refresh_rate,
            )),
            LearnerKind::Ddqn => {
                let encoder = ObsEncoder::new(width, height);
                let mut sizes = vec![encoder.len()];
                sizes.extend(config.hidden.as_ref().expect("validated config"));
                sizes.push(n_actions);
                let mut net = MlpValueNet::new(&sizes, rng);
                net.clip_norm = config.clip_norm;
                Agent::Ddqn {
                    net,
                    encoder,
                    learning_rate: config.learning_rate.expect("validated config"),
                    gamma: config.gamma,
                    refresh_rate: config.refresh_rate,
                }
            }
        }
    }

    pub fn q_values(&self, obs: &GridObs) -> Vec<f64> {
        match self {
            Agent::Tabular(a) => a.q.row(obs.id).to_vec(),
            Agent::Ddqn { net, encoder, .. } => net.q_values(&encoder.encode(obs)),
        }
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &GridObs, epsilon: f64, rng: &mut R) -> usize {
        epsilon_greedy(&self.q_values(obs), epsilon, rng)
    }

    /// One update on `batch`, followed by a target refresh. Returns |TD error| per item.
    pub fn train(&mut self, batch: &SampledBatch<GridObs>) -> Result<Vec<f64>, LearnerError> {
        match self {
            Agent::Tabular(a) => {
                let td = a.train_batch_with(batch, |s| s.id);
                if td.iter().all(|d| d.is_finite()) {
                    Ok(td)
                } else {
                    Err(LearnerError::NonFiniteLoss("tabular TD error".into()))
                }
            }
            Agent::Ddqn { net, encoder, learning_rate, gamma, refresh_rate } => {
                let width = encoder.len();
                let mut states = vec![0.0; 2 * width * batch.len()];
                for (item, chunk) in batch.items.iter().zip(states.chunks_mut(2 * width)) {
                    let t = item.transition();
                    let (s, s2) = chunk.split_at_mut(width);
                    encoder.encode_into(&t.state, s);
                    encoder.encode_into(&t.next_state, s2);
                }
                let samples: Vec<DdqnSample<'_>> = batch
                    .items
                    .iter()
                    .zip(states.chunks(2 * width))
                    .map(|(item, chunk)| {
                        let t = item.transition();
                        DdqnSample {
                            state: &chunk[..width],
                            action: t.action,
                            reward: t.reward,
                            next_state: &chunk[width..],
                            done: t.done,
                            weight: item.weight,
                        }
                    })
                    .collect();
                let out = ddqn_step(net, &samples, *gamma, *learning_rate)?;
                net.refresh_target(*refresh_rate);
                Ok(out.td_abs)
            }
        }
    }

    /// Sum of target action values over the whole table; `None` for networks.
    pub fn sum_q(&self) -> Option<f64> {
        match self {
            Agent::Tabular(a) => Some(a.target.sum()),
            Agent::Ddqn { .. } => None,
        }
    }
}
