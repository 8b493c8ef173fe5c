use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use super::buffer::Entry;
use super::{LeafId, ReplayError, SampledBatch, SampledItem, Transition};

/// Off-policy reverse sweep: replays whole stored episodes from their last
/// step backwards, picking a random stored episode whenever the current one
/// is exhausted. Capacity is counted in transitions; the oldest episodes are
/// dropped first.
pub struct ReverseSweep<S> {
    capacity: usize,
    stored: usize,
    episodes: VecDeque<Vec<Arc<Entry<S>>>>,
    open: Vec<Arc<Entry<S>>>,
    /// Episode index and the number of its steps not yet replayed.
    cursor: Option<(usize, usize)>,
    episode_id: u64,
}

impl<S> ReverseSweep<S> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            stored: 0,
            episodes: VecDeque::new(),
            open: Vec::new(),
            cursor: None,
            episode_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.stored
    }

    pub fn is_empty(&self) -> bool {
        self.stored == 0
    }

    pub fn num_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn insert(&mut self, mut transition: Transition<S>) {
        if self.open.last().is_some_and(|e| e.transition.done) {
            self.end_episode();
        }
        transition.episode_id = self.episode_id;
        transition.step_index = self.open.len() as u64;
        self.open.push(Arc::new(Entry::detached(transition)));
    }

    pub fn end_episode(&mut self) {
        if self.open.is_empty() {
            return;
        }
        let ep = std::mem::take(&mut self.open);
        self.stored += ep.len();
        self.episodes.push_back(ep);
        while self.stored > self.capacity && self.episodes.len() > 1 {
            let dropped = self.episodes.pop_front().expect("non-empty");
            self.stored -= dropped.len();
            self.cursor = match self.cursor {
                Some((0, _)) | None => None,
                Some((i, left)) => Some((i - 1, left)),
            };
        }
        self.episode_id += 1;
    }

    /// Next `batch_size` steps of the reverse stream.
    pub fn sample_batch<R: Rng + ?Sized>(
        &mut self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<SampledBatch<S>, ReplayError> {
        if batch_size == 0 {
            return Err(ReplayError::ZeroBatch);
        }
        if self.episodes.is_empty() {
            return Err(ReplayError::EmptyDefaultTable);
        }
        let mut items = Vec::with_capacity(batch_size);
        while items.len() < batch_size {
            let (ep, left) = match self.cursor {
                Some((ep, left)) if left > 0 => (ep, left),
                _ => {
                    let ep = rng.gen_range(0..self.episodes.len());
                    (ep, self.episodes[ep].len())
                }
            };
            let step = left - 1;
            items.push(SampledItem::from_entry(
                Arc::clone(&self.episodes[ep][step]),
                LeafId {
                    table: 0,
                    slot: step,
                    seq: 0,
                },
            ));
            self.cursor = Some((ep, step));
        }
        Ok(SampledBatch {
            items,
            counts: vec![batch_size],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn replays_episode_backwards() {
        let mut sweep = ReverseSweep::new(100);
        for i in 0..5usize {
            sweep.insert(Transition::new(i, 0, 0.0, i + 1, i == 4));
        }
        sweep.end_episode();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = sweep.sample_batch(7, &mut rng).unwrap();
        let states: Vec<usize> = batch.items.iter().map(|it| it.transition().state).collect();
        assert_eq!(states, vec![4, 3, 2, 1, 0, 4, 3]);
    }

    #[test]
    fn drops_oldest_episodes() {
        let mut sweep = ReverseSweep::new(6);
        for ep in 0..3usize {
            for i in 0..3usize {
                sweep.insert(Transition::new(ep * 10 + i, 0, 0.0, 0, false));
            }
            sweep.end_episode();
        }
        assert_eq!(sweep.num_episodes(), 2);
        assert_eq!(sweep.len(), 6);
    }

    #[test]
    fn empty_rejected() {
        let mut sweep: ReverseSweep<usize> = ReverseSweep::new(6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sweep.sample_batch(1, &mut rng).is_err());
    }
}
