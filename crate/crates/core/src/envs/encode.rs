//! Observation features for value networks and exact tabular models of fixed layouts.

use std::collections::{HashMap, VecDeque};

use super::grid::{AgentState, GridObs, GridWorld, Tile, COLORS, VIEW};
use super::EnvError;
use crate::theory::TabularMdp;

const CATEGORIES: usize = 8;

fn category(tile: Tile) -> usize {
    match tile {
        Tile::Empty | Tile::Gap => 0,
        Tile::Wall => 1,
        Tile::Goal => 2,
        Tile::Spike => 3,
        Tile::Lava => 4,
        Tile::Key(_) => 5,
        Tile::Door { locked: true, .. } => 6,
        Tile::Door { locked: false, .. } => 7,
    }
}

fn color_code(tile: Tile) -> f64 {
    tile.color().map_or(0.0, |c| (c.index() + 1) as f64 / COLORS.len() as f64)
}

/// Flat features: one-hot view categories, per-cell colour codes, the carried
/// object and the normalized pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObsEncoder {
    pub width: usize,
    pub height: usize,
}

impl ObsEncoder {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn len(&self) -> usize {
        VIEW * VIEW * (CATEGORIES + 1) + 3 + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode_into(&self, obs: &GridObs, out: &mut [f64]) {
        assert_eq!(out.len(), self.len(), "feature buffer length");
        out.fill(0.0);
        let cells = VIEW * VIEW;
        for (i, &tile) in obs.view.iter().enumerate() {
            out[i * CATEGORIES + category(tile)] = 1.0;
            out[cells * CATEGORIES + i] = color_code(tile);
        }
        let mut k = cells * (CATEGORIES + 1);
        match obs.carrying {
            Some(c) => {
                out[k] = 1.0;
                out[k + 1] = category(Tile::Key(c)) as f64 / (CATEGORIES - 1) as f64;
                out[k + 2] = (c.index() + 1) as f64 / COLORS.len() as f64;
            }
            None => {
                out[k + 1] = -1.0;
                out[k + 2] = -1.0;
            }
        }
        k += 3;
        out[k] = obs.pose.x as f64 / (self.width - 1).max(1) as f64;
        out[k + 1] = obs.pose.y as f64 / (self.height - 1).max(1) as f64;
        out[k + 2] = obs.pose.dir.index() as f64 / 3.0;
    }

    pub fn encode(&self, obs: &GridObs) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.encode_into(obs, &mut out);
        out
    }
}

/// Exact finite model of a fixed, key-free layout.
#[derive(Debug, Clone)]
pub struct Tabularized {
    pub mdp: TabularMdp,
    pub states: Vec<AgentState>,
    pub index: HashMap<AgentState, usize>,
    /// Affine map applied to rewards: `r' = (r - offset) * scale`.
    pub offset: f64,
    pub scale: f64,
}

impl Tabularized {
    pub fn state_of(&self, obs: &GridObs) -> Option<usize> {
        self.index
            .get(&AgentState { pose: obs.pose, carrying: obs.carrying })
            .copied()
    }

    pub fn rescale(&self, reward: f64) -> f64 {
        (reward - self.offset) * self.scale
    }
}

/// Enumerates the poses reachable from the start and builds the transition
/// model, rewards mapped affinely into `[0, 1]`. Terminal poses become
/// absorbing traps worth the image of reward 0. Layouts with keys or doors
/// are rejected.
pub fn tabularize(env: &GridWorld, gamma: f64) -> Result<Tabularized, EnvError> {
    let layout = env.layout().clone();
    if !layout.find(|t| matches!(t, Tile::Key(_) | Tile::Door { .. })).is_empty() {
        return Err(EnvError::Layout("tabularization needs a layout without keys or doors".into()));
    }
    let config = *env.config();
    let mut det = env.clone();
    det.config_mut().slip = 0.0;
    det.config_mut().horizon = usize::MAX;
    det.reset();

    let moves = config.n_actions.min(3);
    let start = AgentState { pose: layout.start, carrying: None };
    let mut states = vec![start];
    let mut index = HashMap::from([(start, 0usize)]);
    // (state, executed action) -> (next, reward, terminated)
    let mut edges: Vec<Vec<(usize, f64, bool)>> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    let mut terminal = Vec::new();
    while let Some(i) = queue.pop_front() {
        let s = states[i];
        let tile = layout.get(s.pose.x, s.pose.y);
        if matches!(tile, Tile::Goal | Tile::Lava) {
            terminal.push(i);
            continue;
        }
        let mut row = Vec::with_capacity(config.n_actions);
        for a in 0..config.n_actions {
            det.set_state(s);
            let step = det.step(a)?;
            let next = AgentState { pose: step.obs.pose, carrying: step.obs.carrying };
            let j = *index.entry(next).or_insert_with(|| {
                states.push(next);
                queue.push_back(states.len() - 1);
                states.len() - 1
            });
            row.push((j, step.reward, step.terminated));
        }
        if edges.len() <= i {
            edges.resize(i + 1, Vec::new());
        }
        edges[i] = row;
    }

    let lo = config.rewards.min().min(0.0);
    let hi = config.rewards.max().max(0.0);
    let scale = if hi > lo { 1.0 / (hi - lo) } else { 1.0 };
    let map = |r: f64| (r - lo) * scale;

    let n = states.len();
    let mut mdp = TabularMdp::new(n, config.n_actions, gamma, config.horizon);
    for (i, row) in edges.iter().enumerate() {
        if row.is_empty() {
            continue;
        }
        for a in 0..config.n_actions {
            let mut add = |executed: usize, p: f64| {
                let (j, r, _) = row[executed];
                mdp.add_outcome(i, a, j, p, map(r));
            };
            add(a, 1.0 - config.slip);
            if config.slip > 0.0 {
                for m in 0..moves {
                    add(m, config.slip / moves as f64);
                }
            }
        }
    }
    for &t in &terminal {
        mdp.make_terminal(t, map(0.0));
    }
    mdp.initial[0] = 1.0;
    mdp.validate().map_err(|e| EnvError::Layout(format!("tabular model invalid: {e}")))?;
    Ok(Tabularized { mdp, states, index, offset: lo, scale })
}
