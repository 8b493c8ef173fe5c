//! Replay samplers built from a [`SamplerConfig`].

use rand::Rng;
use sset_core::envs::{GridObs, Predicate};
use sset_core::replay::{
    BufferConfig, EventSpec, ReplayBuffer, ReplayError, ReverseSweep, SampledBatch, TableConfig, TableStats,
    Transition,
};

use crate::config::{SamplerConfig, SamplerKind};
use crate::HarnessError;

pub enum Sampler {
    Tables { buffer: ReplayBuffer<GridObs>, prioritized: bool },
    Sweep { sweep: ReverseSweep<GridObs>, capacity: usize, inserts: u64 },
}

fn table_capacity(capacity: usize, eta: f64) -> usize {
    ((capacity as f64 * eta).round() as usize).max(1)
}

impl Sampler {
    pub fn new(config: &SamplerConfig) -> Result<Self, HarnessError> {
        let prioritized = config.kind.uses_priorities();
        match config.kind {
            SamplerKind::ReverseSweep => Ok(Sampler::Sweep {
                sweep: ReverseSweep::new(config.capacity),
                capacity: config.capacity,
                inserts: 0,
            }),
            SamplerKind::Uniform | SamplerKind::Per => {
                let mut bc = BufferConfig::uniform(config.capacity).with_allocation(config.allocation);
                if prioritized {
                    bc = bc.with_priorities(config.priority_exponent);
                }
                let buffer = ReplayBuffer::new(Vec::new(), bc).map_err(|e| HarnessError::Config(e.to_string()))?;
                Ok(Sampler::Tables { buffer, prioritized })
            }
            SamplerKind::Sset | SamplerKind::SsetPer => {
                let eta0 = config.default_eta();
                let mut tables = vec![TableConfig::new(eta0, table_capacity(config.capacity, eta0), 1)];
                let mut specs: Vec<EventSpec<GridObs>> = Vec::with_capacity(config.events.len());
                for e in &config.events {
                    let predicate = Predicate::parse(&e.predicate).map_err(|err| HarnessError::Config(err.to_string()))?;
                    specs.push(predicate.event_spec(e.tau));
                    let kappa = e.kappa.unwrap_or_else(|| table_capacity(config.capacity, e.eta));
                    tables.push(TableConfig::new(e.eta, kappa, e.d_min));
                }
                let sum: f64 = tables.iter().map(|t| t.eta).sum();
                tables[0].eta += 1.0 - sum;
                let mut bc = BufferConfig::new(tables)
                    .with_bias_mode(config.bias_mode)
                    .with_allocation(config.allocation);
                if prioritized {
                    bc = bc.with_priorities(config.priority_exponent);
                }
                let buffer = ReplayBuffer::new(specs, bc).map_err(|e| HarnessError::Config(e.to_string()))?;
                Ok(Sampler::Tables { buffer, prioritized })
            }
        }
    }

    pub fn insert(&mut self, t: Transition<GridObs>) {
        match self {
            Sampler::Tables { buffer, .. } => {
                buffer.insert(t);
            }
            Sampler::Sweep { sweep, inserts, .. } => {
                sweep.insert(t);
                *inserts += 1;
            }
        }
    }

    pub fn end_episode(&mut self) {
        match self {
            Sampler::Tables { buffer, .. } => buffer.end_episode(),
            Sampler::Sweep { sweep, .. } => sweep.end_episode(),
        }
    }

    /// Transitions available to sample. The sweep only replays closed episodes.
    pub fn ready(&self) -> bool {
        match self {
            Sampler::Tables { buffer, .. } => !buffer.is_empty(),
            Sampler::Sweep { sweep, .. } => sweep.num_episodes() > 0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, batch: usize, rng: &mut R) -> Result<SampledBatch<GridObs>, ReplayError> {
        match self {
            Sampler::Tables { buffer, .. } => buffer.sample_batch(batch, rng),
            Sampler::Sweep { sweep, .. } => sweep.sample_batch(batch, rng),
        }
    }

    /// Feeds TD errors back when priorities are in use.
    pub fn report(&mut self, batch: &SampledBatch<GridObs>, td_abs: &[f64]) -> Result<(), ReplayError> {
        if let Sampler::Tables { buffer, prioritized: true } = self {
            for (item, &td) in batch.items.iter().zip(td_abs) {
                buffer.update_priority(item.leaf, td)?;
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> Vec<TableStats> {
        match self {
            Sampler::Tables { buffer, .. } => buffer.table_stats(),
            Sampler::Sweep { sweep, capacity, inserts } => vec![TableStats {
                name: "sweep".into(),
                size: sweep.len(),
                capacity: *capacity,
                total_inserts: *inserts,
                total_evictions: 0,
                eligible: sweep.num_episodes() > 0,
            }],
        }
    }
}
