use std::sync::{Arc, Mutex, MutexGuard};

use rand::Rng;

use super::{LeafId, ReplayBuffer, ReplayError, ReplayState, SampledBatch, TableStats, Transition};

/// A replay buffer shared between one writer (the actor loop) and one
/// sampler (the learner). Every call takes the internal lock once, so stats
/// are consistent snapshots.
pub struct SharedReplayBuffer<S> {
    inner: Arc<Mutex<ReplayBuffer<S>>>,
}

impl<S> Clone for SharedReplayBuffer<S> {
    fn clone(&self) -> Self {
        Self {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<S: ReplayState> SharedReplayBuffer<S> {
    pub fn new(buffer: ReplayBuffer<S>) -> Self {
        Self {
            inner: Arc::new(Mutex::new(buffer)),
        }
    }

    fn lock(&self) -> MutexGuard<'_, ReplayBuffer<S>> {
        // A panic while holding the lock cannot leave a table half-written in a
        // way later calls would misread, so poisoning is ignored.
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn insert(&self, transition: Transition<S>) -> Vec<usize> {
        self.lock().insert(transition)
    }

    pub fn end_episode(&self) {
        self.lock().end_episode()
    }

    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<SampledBatch<S>, ReplayError> {
        self.lock().sample_batch(batch_size, rng)
    }

    pub fn update_priority(&self, leaf: LeafId, td_error: f64) -> Result<(), ReplayError> {
        self.lock().update_priority(leaf, td_error)
    }

    pub fn table_stats(&self) -> Vec<TableStats> {
        self.lock().table_stats()
    }

    /// Runs `f` with exclusive access to the underlying buffer.
    pub fn with<T>(&self, f: impl FnOnce(&mut ReplayBuffer<S>) -> T) -> T {
        f(&mut self.lock())
    }
}
