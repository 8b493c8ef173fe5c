use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::allocation::{largest_remainder, renormalize, AllocationMode};
use super::{
    BiasMode, EpisodeView, EventSpec, ReplayError, ReplayState, SumTree, TableConfig, Transition,
    PRIORITY_EPSILON,
};

/// A stored transition shared by every table holding it.
#[derive(Debug)]
pub(crate) struct Entry<S> {
    pub(crate) transition: Transition<S>,
    /// Set once any event table received this step.
    captured: AtomicBool,
    /// Default-table slot and insertion number at insert time.
    default_slot: usize,
    default_seq: u64,
}

impl<S> Entry<S> {
    pub(crate) fn detached(transition: Transition<S>) -> Self {
        Self {
            transition,
            captured: AtomicBool::new(false),
            default_slot: usize::MAX,
            default_seq: 0,
        }
    }

    fn is_captured(&self) -> bool {
        self.captured.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferConfig {
    /// Index 0 is the default table, then one per event spec.
    pub tables: Vec<TableConfig>,
    pub bias_mode: BiasMode,
    /// Attach a priority sum tree to every table.
    pub prioritized: bool,
    pub priority_exponent: f64,
    pub allocation: AllocationMode,
}

impl BufferConfig {
    pub fn new(tables: Vec<TableConfig>) -> Self {
        Self {
            tables,
            bias_mode: BiasMode::None,
            prioritized: false,
            priority_exponent: 1.0,
            allocation: AllocationMode::LargestRemainder,
        }
    }

    pub fn uniform(capacity: usize) -> Self {
        Self::new(vec![TableConfig::new(1.0, capacity, 1)])
    }

    pub fn with_bias_mode(mut self, mode: BiasMode) -> Self {
        self.bias_mode = mode;
        self
    }

    pub fn with_priorities(mut self, exponent: f64) -> Self {
        self.prioritized = true;
        self.priority_exponent = exponent;
        self
    }

    pub fn with_allocation(mut self, allocation: AllocationMode) -> Self {
        self.allocation = allocation;
        self
    }
}

/// Identifies a sampled slot so its priority can be updated later.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LeafId {
    pub table: usize,
    pub slot: usize,
    /// Per-table insertion number of the occupant when sampled.
    pub seq: u64,
}

pub struct SampledItem<S> {
    entry: Arc<Entry<S>>,
    pub table: usize,
    pub weight: f64,
    pub leaf: LeafId,
}

impl<S> SampledItem<S> {
    pub(crate) fn from_entry(entry: Arc<Entry<S>>, leaf: LeafId) -> Self {
        Self {
            entry,
            table: leaf.table,
            weight: 1.0,
            leaf,
        }
    }

    pub fn transition(&self) -> &Transition<S> {
        &self.entry.transition
    }
}

pub struct SampledBatch<S> {
    pub items: Vec<SampledItem<S>>,
    /// Number of items drawn from each table.
    pub counts: Vec<usize>,
}

impl<S> SampledBatch<S> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableStats {
    pub name: String,
    pub size: usize,
    pub capacity: usize,
    pub total_inserts: u64,
    pub total_evictions: u64,
    pub eligible: bool,
}

/// Occurrences of an (s, a) pair inside and outside any event history.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCounts {
    pub inside: u64,
    pub outside: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.inside + self.outside
    }

    pub fn outside_fraction(&self) -> f64 {
        self.outside as f64 / self.total() as f64
    }
}

struct Table<S> {
    name: String,
    config: TableConfig,
    slots: Vec<Option<Arc<Entry<S>>>>,
    seqs: Vec<u64>,
    next: usize,
    len: usize,
    inserts: u64,
    evictions: u64,
    priorities: Option<SumTree>,
    max_priority: f64,
}

impl<S> Table<S> {
    fn new(name: String, config: TableConfig, prioritized: bool) -> Self {
        Self {
            name,
            config,
            slots: (0..config.kappa).map(|_| None).collect(),
            seqs: vec![0; config.kappa],
            next: 0,
            len: 0,
            inserts: 0,
            evictions: 0,
            priorities: prioritized.then(|| SumTree::new(config.kappa)),
            max_priority: 1.0,
        }
    }

    fn eligible(&self) -> bool {
        self.len >= self.config.d_min.max(1)
    }

    /// Appends in FIFO order; returns the slot written and the evicted entry.
    fn push(&mut self, entry: Arc<Entry<S>>) -> (usize, Option<Arc<Entry<S>>>) {
        let slot = self.next;
        let evicted = self.slots[slot].replace(entry);
        if evicted.is_some() {
            self.evictions += 1;
        } else {
            self.len += 1;
        }
        self.inserts += 1;
        self.seqs[slot] = self.inserts;
        self.next = (self.next + 1) % self.config.kappa;
        if let Some(tree) = self.priorities.as_mut() {
            tree.set(slot, self.max_priority)
                .expect("slot is within tree capacity");
        }
        (slot, evicted)
    }

    fn oldest_first(&self) -> impl Iterator<Item = &Arc<Entry<S>>> {
        let start = if self.len < self.config.kappa { 0 } else { self.next };
        (0..self.len).map(move |k| {
            self.slots[(start + k) % self.config.kappa]
                .as_ref()
                .expect("filled slot")
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.priorities {
            Some(tree) if tree.total() > 0.0 => tree.find_prefix(rng.gen::<f64>() * tree.total()),
            _ => rng.gen_range(0..self.len),
        }
    }
}

/// Replay buffer partitioned into a default table and event tables.
pub struct ReplayBuffer<S> {
    specs: Vec<EventSpec<S>>,
    tables: Vec<Table<S>>,
    episode: Vec<Arc<Entry<S>>>,
    /// Per event: index in `episode` of the last step sent to its table.
    last_sent: Vec<Option<usize>>,
    episode_id: u64,
    bias_mode: BiasMode,
    priority_exponent: f64,
    allocation: AllocationMode,
    pair_counts: HashMap<(usize, usize), PairCounts>,
    /// (1 ± eta) priorities over default-table slots, sum-tree bias mode only.
    bias_tree: Option<SumTree>,
}

impl<S: ReplayState> ReplayBuffer<S> {
    pub fn new(specs: Vec<EventSpec<S>>, config: BufferConfig) -> Result<Self, ReplayError> {
        let n = specs.len();
        if config.tables.len() != n + 1 {
            return Err(ReplayError::TableCount {
                expected: n + 1,
                events: n,
                got: config.tables.len(),
            });
        }
        for (i, t) in config.tables.iter().enumerate() {
            if !(0.0..=1.0).contains(&t.eta) {
                return Err(ReplayError::EtaRange { table: i, eta: t.eta });
            }
            if t.kappa < 1 {
                return Err(ReplayError::ZeroCapacity(i));
            }
            if t.d_min > t.kappa {
                return Err(ReplayError::DminAboveCapacity {
                    table: i,
                    d_min: t.d_min,
                    kappa: t.kappa,
                });
            }
        }
        let sum: f64 = config.tables.iter().map(|t| t.eta).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ReplayError::EtaSum(sum));
        }
        if let Some(s) = specs.iter().find(|s| s.tau < 1) {
            return Err(ReplayError::ZeroTau(s.name.clone()));
        }
        if !(config.priority_exponent.is_finite() && config.priority_exponent >= 0.0) {
            return Err(ReplayError::PriorityExponent(config.priority_exponent));
        }

        let tables = config
            .tables
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let name = if i == 0 {
                    "default".to_string()
                } else {
                    specs[i - 1].name.clone()
                };
                Table::new(name, *c, config.prioritized)
            })
            .collect();
        let bias_tree =
            (config.bias_mode == BiasMode::SumTree).then(|| SumTree::new(config.tables[0].kappa));
        Ok(Self {
            last_sent: vec![None; n],
            specs,
            tables,
            episode: Vec::new(),
            episode_id: 0,
            bias_mode: config.bias_mode,
            priority_exponent: config.priority_exponent,
            allocation: config.allocation,
            pair_counts: HashMap::new(),
            bias_tree,
        })
    }

    pub fn num_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn specs(&self) -> &[EventSpec<S>] {
        &self.specs
    }

    pub fn bias_mode(&self) -> BiasMode {
        self.bias_mode
    }

    pub fn episode_id(&self) -> u64 {
        self.episode_id
    }

    pub fn episode_len(&self) -> usize {
        self.episode.len()
    }

    /// The open episode's stored steps, as event conditions see them.
    pub fn episode_view(&self) -> EpisodeView<'_, S> {
        EpisodeView { entries: &self.episode }
    }

    /// Number of transitions in the default table.
    pub fn len(&self) -> usize {
        self.tables[0].len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Combined sampling probability of the event tables.
    pub fn event_eta(&self) -> f64 {
        self.tables[1..].iter().map(|t| t.config.eta).sum()
    }

    /// Stores a step of the open episode and fires event captures.
    ///
    /// The buffer stamps `episode_id` and `step_index`. If the previous step
    /// of the episode was terminal, the episode is closed first. Returns the
    /// table ids (1-based) whose events fired on this step.
    pub fn insert(&mut self, mut transition: Transition<S>) -> Vec<usize> {
        if self.episode.last().is_some_and(|e| e.transition.done) {
            self.end_episode();
        }
        transition.episode_id = self.episode_id;
        transition.step_index = self.episode.len() as u64;

        let fired: Vec<usize> = self
            .specs
            .iter()
            .enumerate()
            .filter(|(_, spec)| {
                spec.condition.holds(
                    &transition,
                    EpisodeView {
                        entries: &self.episode,
                    },
                )
            })
            .map(|(i, _)| i + 1)
            .collect();

        let entry = Arc::new(Entry {
            transition,
            captured: AtomicBool::new(false),
            default_slot: self.tables[0].next,
            default_seq: self.tables[0].inserts + 1,
        });
        let (slot, evicted) = self.tables[0].push(Arc::clone(&entry));
        if let Some(tree) = self.bias_tree.as_mut() {
            let eta = self.tables[1..].iter().map(|t| t.config.eta).sum::<f64>();
            tree.set(slot, 1.0 - eta).expect("slot within capacity");
        }
        drop(evicted);
        self.episode.push(entry);

        let now = self.episode.len() - 1;
        for &table in &fired {
            let ev = table - 1;
            let tau = self.specs[ev].tau;
            let window_start = (now + 1).saturating_sub(tau);
            let start = match self.last_sent[ev] {
                Some(prev) => window_start.max(prev + 1),
                None => window_start,
            };
            for k in start..=now {
                let e = Arc::clone(&self.episode[k]);
                self.mark_captured(&e);
                self.tables[table].push(e);
            }
            self.last_sent[ev] = Some(now);
        }
        fired
    }

    fn mark_captured(&mut self, entry: &Arc<Entry<S>>) {
        let was = entry.captured.swap(true, Ordering::Relaxed);
        if was {
            return;
        }
        if let Some(tree) = self.bias_tree.as_mut() {
            let eta: f64 = self.tables[1..].iter().map(|t| t.config.eta).sum();
            if self.tables[0].seqs[entry.default_slot] == entry.default_seq {
                tree.set(entry.default_slot, 1.0 + eta)
                    .expect("slot within capacity");
            }
        }
    }

    /// Closes the open episode: updates the (s, a) membership counts in
    /// discrete-count mode and starts a new episode id.
    pub fn end_episode(&mut self) {
        if self.episode.is_empty() {
            return;
        }
        if self.bias_mode == BiasMode::DiscreteCount {
            for e in &self.episode {
                if let Some(s) = e.transition.state.discrete_key() {
                    let c = self.pair_counts.entry((s, e.transition.action)).or_default();
                    if e.is_captured() {
                        c.inside += 1;
                    } else {
                        c.outside += 1;
                    }
                }
            }
        }
        self.episode.clear();
        self.last_sent.iter_mut().for_each(|s| *s = None);
        self.episode_id += 1;
    }

    pub fn pair_counts(&self, state: usize, action: usize) -> Option<PairCounts> {
        self.pair_counts.get(&(state, action)).copied()
    }

    /// Closed-form correction weight for an (s, a) pair:
    /// `1 - eta * P(outside | s, a)` if the pair was ever captured by an event
    /// table, `1 / (1 - eta)` otherwise, with eta the total event-table mass.
    pub fn bias_weight(&self, state: usize, action: usize) -> Result<f64, ReplayError> {
        if self.bias_mode != BiasMode::DiscreteCount {
            return Err(ReplayError::BiasModeMismatch);
        }
        let counts = self
            .pair_counts(state, action)
            .filter(|c| c.total() > 0)
            .ok_or(ReplayError::UnseenPair(state, action))?;
        let eta = self.event_eta();
        Ok(if counts.inside > 0 {
            1.0 - eta * counts.outside_fraction()
        } else {
            1.0 / (1.0 - eta)
        })
    }

    /// Importance weight attached to a sampled item.
    ///
    /// Discrete-count mode restores the default-table outcome mix for the
    /// item's (s, a): items outside every event history are under-sampled by
    /// `1 - eta`, captured items absorb the event mass, so they are weighted
    /// `p_in / (p_in + eta * p_out)` with `p_in`, `p_out` the counted
    /// inside/outside frequencies of the pair.
    fn item_weight(&self, entry: &Entry<S>, event_mass: f64) -> f64 {
        if event_mass <= 0.0 {
            return 1.0;
        }
        match self.bias_mode {
            BiasMode::None => 1.0,
            BiasMode::DiscreteCount => {
                if !entry.is_captured() {
                    return 1.0 / (1.0 - event_mass);
                }
                let key = entry
                    .transition
                    .state
                    .discrete_key()
                    .map(|s| (s, entry.transition.action));
                match key.and_then(|k| self.pair_counts.get(&k)) {
                    Some(c) if c.inside > 0 => {
                        let total = c.total() as f64;
                        let p_in = c.inside as f64 / total;
                        let p_out = c.outside as f64 / total;
                        p_in / (p_in + event_mass * p_out)
                    }
                    _ => 1.0,
                }
            }
            BiasMode::SumTree => {
                let tree = self.bias_tree.as_ref().expect("sum-tree mode has a tree");
                let n = self.tables[0].len as f64;
                if entry.is_captured() && n > 0.0 {
                    let eta = self.event_eta();
                    (tree.total() / n) / (1.0 + eta)
                } else {
                    1.0
                }
            }
        }
    }

    /// Draws a stratified batch.
    ///
    /// Tables below their minimum fill are skipped and their eta mass is
    /// spread proportionally over the remaining tables.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<SampledBatch<S>, ReplayError> {
        if batch_size == 0 {
            return Err(ReplayError::ZeroBatch);
        }
        if self.tables[0].len == 0 {
            return Err(ReplayError::EmptyDefaultTable);
        }
        let etas: Vec<f64> = self.tables.iter().map(|t| t.config.eta).collect();
        let mut eligible: Vec<bool> = self.tables.iter().map(Table::eligible).collect();
        // The default table carries the batch when nothing else can.
        let weights = renormalize(&etas, &eligible).unwrap_or_else(|| {
            eligible = vec![false; etas.len()];
            eligible[0] = true;
            let mut w = vec![0.0; etas.len()];
            w[0] = 1.0;
            w
        });
        let event_mass: f64 = weights[1..].iter().sum();

        let counts = match self.allocation {
            AllocationMode::LargestRemainder => largest_remainder(&weights, batch_size),
            AllocationMode::Multinomial => {
                let mut counts = vec![0usize; weights.len()];
                for _ in 0..batch_size {
                    counts[pick(&weights, rng.gen::<f64>())] += 1;
                }
                counts
            }
        };

        let mut items = Vec::with_capacity(batch_size);
        for (t, &count) in counts.iter().enumerate() {
            let table = &self.tables[t];
            for _ in 0..count {
                let slot = table.draw(rng);
                let entry = Arc::clone(table.slots[slot].as_ref().expect("drawn slot is filled"));
                let weight = self.item_weight(&entry, event_mass);
                items.push(SampledItem {
                    entry,
                    table: t,
                    weight,
                    leaf: LeafId {
                        table: t,
                        slot,
                        seq: table.seqs[slot],
                    },
                });
            }
        }
        Ok(SampledBatch { items, counts })
    }

    /// Sets the priority of a sampled slot to `(|td_error| + eps)^alpha`.
    ///
    /// Updates addressed to a slot that has since been overwritten are ignored.
    pub fn update_priority(&mut self, leaf: LeafId, td_error: f64) -> Result<(), ReplayError> {
        let alpha = self.priority_exponent;
        let table = self
            .tables
            .get_mut(leaf.table)
            .ok_or_else(|| ReplayError::UnknownLeaf(format!("no table {}", leaf.table)))?;
        let Some(tree) = table.priorities.as_mut() else {
            return Err(ReplayError::UnknownLeaf(format!(
                "table {} has no priority tree",
                leaf.table
            )));
        };
        if leaf.slot >= table.len || leaf.seq == 0 || leaf.seq > table.inserts {
            return Err(ReplayError::UnknownLeaf(format!(
                "slot {} (seq {}) of table {}",
                leaf.slot, leaf.seq, leaf.table
            )));
        }
        if !td_error.is_finite() {
            return Err(ReplayError::InvalidPriority(td_error));
        }
        if table.seqs[leaf.slot] != leaf.seq {
            return Ok(());
        }
        let p = (td_error.abs() + PRIORITY_EPSILON).powf(alpha);
        tree.set(leaf.slot, p)?;
        table.max_priority = table.max_priority.max(p);
        Ok(())
    }

    pub fn priority(&self, leaf: LeafId) -> Option<f64> {
        let table = self.tables.get(leaf.table)?;
        table.priorities.as_ref().map(|t| t.get(leaf.slot))
    }

    pub fn table_stats(&self) -> Vec<TableStats> {
        self.tables
            .iter()
            .map(|t| TableStats {
                name: t.name.clone(),
                size: t.len,
                capacity: t.config.kappa,
                total_inserts: t.inserts,
                total_evictions: t.evictions,
                eligible: t.eligible(),
            })
            .collect()
    }

    /// Contents of a table, oldest first.
    pub fn table_transitions(&self, table: usize) -> Vec<&Transition<S>> {
        self.tables[table]
            .oldest_first()
            .map(|e| &e.transition)
            .collect()
    }

    /// Visits every transition currently stored in the default table.
    pub fn for_each_default(&self, mut f: impl FnMut(&Transition<S>)) {
        self.tables[0].oldest_first().for_each(|e| f(&e.transition));
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
