//! Tile-based gridworld engine with MiniGrid-style pose dynamics.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layouts::Generator;
use crate::replay::ReplayState;
use super::EnvError;

pub const COLORS: [Color; 4] = [Color::Red, Color::Green, Color::Blue, Color::Yellow];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    Red,
    Green,
    Blue,
    Yellow,
}

impl Color {
    pub fn index(self) -> usize {
        self as usize
    }

    fn letter(self) -> char {
        ['r', 'g', 'b', 'y'][self.index()]
    }

    fn from_letter(c: char) -> Option<Self> {
        COLORS.into_iter().find(|col| col.letter() == c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Tile {
    #[default]
    Empty,
    Wall,
    /// Passable opening in a wall between rooms.
    Gap,
    Goal,
    Spike,
    Lava,
    Key(Color),
    Door { color: Color, locked: bool },
}

impl Tile {
    /// Whether the agent may stand on this tile.
    pub fn passable(self) -> bool {
        match self {
            Tile::Wall | Tile::Key(_) => false,
            Tile::Door { locked, .. } => !locked,
            _ => true,
        }
    }

    pub fn color(self) -> Option<Color> {
        match self {
            Tile::Key(c) | Tile::Door { color: c, .. } => Some(c),
            _ => None,
        }
    }
}

/// Headings in MiniGrid order; `y` grows downwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    East,
    South,
    West,
    North,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::East, Dir::South, Dir::West, Dir::North];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    pub fn left(self) -> Self {
        Self::from_index(self.index() + 3)
    }

    pub fn right(self) -> Self {
        Self::from_index(self.index() + 1)
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Dir::East => (1, 0),
            Dir::South => (0, 1),
            Dir::West => (-1, 0),
            Dir::North => (0, -1),
        }
    }

    fn arrow(self) -> char {
        ['>', 'v', '<', '^'][self.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub x: usize,
    pub y: usize,
    pub dir: Dir,
}

impl Pose {
    pub fn new(x: usize, y: usize, dir: Dir) -> Self {
        Self { x, y, dir }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    TurnLeft,
    TurnRight,
    Forward,
    Pickup,
    Drop,
    Toggle,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::TurnLeft,
        Action::TurnRight,
        Action::Forward,
        Action::Pickup,
        Action::Drop,
        Action::Toggle,
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// Side effect of the action that produced an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Effect {
    #[default]
    None,
    Moved,
    Blocked,
    PickedKey,
    DroppedKey,
    OpenedDoor,
}

/// Side length of the egocentric view.
pub const VIEW: usize = 5;

/// What the agent sees after a step.
#[derive(Debug, Clone, PartialEq)]
pub struct GridObs {
    /// Index of (pose, carried key) on this grid; see [`GridObs::index`].
    pub id: usize,
    pub pose: Pose,
    pub carrying: Option<Color>,
    /// Tile under the agent.
    pub tile: Tile,
    pub effect: Effect,
    /// Egocentric forward view, row-major with the farthest row first; the
    /// agent sits at the bottom centre facing up. Off-grid cells read as walls.
    pub view: [Tile; VIEW * VIEW],
}

impl GridObs {
    /// Number of distinct ids on a `width x height` grid.
    pub fn id_space(width: usize, height: usize) -> usize {
        width * height * 4 * (COLORS.len() + 1)
    }

    pub fn index(width: usize, pose: Pose, carrying: Option<Color>) -> usize {
        let carry = carrying.map_or(0, |c| c.index() + 1);
        (((pose.y * width + pose.x) * 4) + pose.dir.index()) * (COLORS.len() + 1) + carry
    }
}

impl ReplayState for GridObs {
    fn discrete_key(&self) -> Option<usize> {
        Some(self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardScheme {
    /// Reward for an ordinary step.
    pub step: f64,
    /// Reward on entering the goal; replaces the step reward.
    pub goal: f64,
    /// Reward on entering a spike; replaces the step reward.
    pub spike: f64,
    /// Reward on entering lava, which also ends the episode.
    pub lava: f64,
}

impl RewardScheme {
    /// `+1` at the goal and `-0.1` for every other step.
    pub fn goal_and_step() -> Self {
        Self { step: -0.1, goal: 1.0, spike: -1.0, lava: -1.0 }
    }

    /// Unit goal reward, small step cost and unit hazard penalties.
    pub fn hazards() -> Self {
        Self { step: -0.01, goal: 1.0, spike: -1.0, lava: -1.0 }
    }

    pub fn min(&self) -> f64 {
        self.step.min(self.goal).min(self.spike).min(self.lava)
    }

    pub fn max(&self) -> f64 {
        self.step.max(self.goal).max(self.spike).max(self.lava)
    }
}

/// Static tile map plus start pose.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Tile>,
    pub start: Pose,
}

impl Layout {
    /// Empty room enclosed by walls.
    pub fn walled(width: usize, height: usize, start: Pose) -> Self {
        let mut l = Self { width, height, cells: vec![Tile::Empty; width * height], start };
        for x in 0..width {
            l.set(x, 0, Tile::Wall);
            l.set(x, height - 1, Tile::Wall);
        }
        for y in 0..height {
            l.set(0, y, Tile::Wall);
            l.set(width - 1, y, Tile::Wall);
        }
        l
    }

    pub fn get(&self, x: usize, y: usize) -> Tile {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, tile: Tile) {
        self.cells[y * self.width + x] = tile;
    }

    /// Tile at signed coordinates; off-grid reads as wall.
    pub fn get_signed(&self, x: i64, y: i64) -> Tile {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            Tile::Wall
        } else {
            self.get(x as usize, y as usize)
        }
    }

    pub fn find(&self, pred: impl Fn(Tile) -> bool) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&(x, y)| pred(self.get(x, y)))
            .collect()
    }

    /// A pose the agent may start from: on the grid, passable and not terminal.
    pub fn check_start(&self, pose: Pose) -> Result<(), EnvError> {
        if pose.x >= self.width || pose.y >= self.height {
            return Err(EnvError::IllegalPose(format!("({}, {}) is off the {}x{} grid", pose.x, pose.y, self.width, self.height)));
        }
        let tile = self.get(pose.x, pose.y);
        if !tile.passable() || matches!(tile, Tile::Goal | Tile::Lava) {
            return Err(EnvError::IllegalPose(format!("({}, {}) holds {tile:?}", pose.x, pose.y)));
        }
        Ok(())
    }

    /// Structured text: a header line followed by two characters per cell.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "layout {} {} start {} {} {}\n",
            self.width,
            self.height,
            self.start.x,
            self.start.y,
            self.start.dir.index()
        );
        for y in 0..self.height {
            for x in 0..self.width {
                let (a, b) = match self.get(x, y) {
                    Tile::Empty => ('.', ' '),
                    Tile::Wall => ('#', ' '),
                    Tile::Gap => ('=', ' '),
                    Tile::Goal => ('*', ' '),
                    Tile::Spike => ('^', ' '),
                    Tile::Lava => ('~', ' '),
                    Tile::Key(c) => ('k', c.letter()),
                    Tile::Door { color, locked: true } => ('D', color.letter()),
                    Tile::Door { color, locked: false } => ('d', color.letter()),
                };
                out.push(a);
                out.push(b);
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`dump`](Self::dump).
    pub fn restore(text: &str) -> Result<Self, EnvError> {
        let bad = |msg: String| EnvError::Layout(msg);
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty text".into()))?.split_whitespace().collect();
        if header.len() != 7 || header[0] != "layout" || header[3] != "start" {
            return Err(bad(format!("bad header {header:?}")));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s}: {e}")));
        let (width, height) = (num(header[1])?, num(header[2])?);
        let start = Pose::new(num(header[4])?, num(header[5])?, Dir::from_index(num(header[6])?));
        let mut cells = Vec::with_capacity(width * height);
        for y in 0..height {
            let row: Vec<char> = lines.next().ok_or_else(|| bad(format!("missing row {y}")))?.chars().collect();
            if row.len() < 2 * width {
                return Err(bad(format!("row {y} too short")));
            }
            for x in 0..width {
                let (a, b) = (row[2 * x], row[2 * x + 1]);
                let color = || Color::from_letter(b).ok_or_else(|| bad(format!("bad colour {b:?} at ({x}, {y})")));
                cells.push(match a {
                    '.' => Tile::Empty,
                    '#' => Tile::Wall,
                    '=' => Tile::Gap,
                    '*' => Tile::Goal,
                    '^' => Tile::Spike,
                    '~' => Tile::Lava,
                    'k' => Tile::Key(color()?),
                    'D' => Tile::Door { color: color()?, locked: true },
                    'd' => Tile::Door { color: color()?, locked: false },
                    other => return Err(bad(format!("unknown tile {other:?} at ({x}, {y})"))),
                });
            }
        }
        Ok(Self { width, height, cells, start })
    }
}

/// Static parameters shared by every episode of a [`GridWorld`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub rewards: RewardScheme,
    pub horizon: usize,
    /// Probability that the chosen action is replaced by a uniform movement action.
    pub slip: f64,
    /// Size of the action set, a prefix of [`Action::ALL`].
    pub n_actions: usize,
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: GridObs,
    pub reward: f64,
    /// Goal or lava reached.
    pub terminated: bool,
    /// Horizon reached without termination.
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Mutable episode state, exposed for tabularization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentState {
    pub pose: Pose,
    pub carrying: Option<Color>,
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    generator: Generator,
    layout: Layout,
    config: GridConfig,
    rng: ChaCha8Rng,
    pose: Pose,
    carrying: Option<Color>,
    steps: usize,
    over: bool,
    start_override: Option<Pose>,
    scenario: Option<usize>,
    regenerations: u64,
}

impl GridWorld {
    pub fn new(generator: Generator, config: GridConfig, seed: u64) -> Result<Self, EnvError> {
        if config.n_actions == 0 || config.n_actions > Action::ALL.len() {
            return Err(EnvError::Layout(format!("n_actions must be in 1..=6, got {}", config.n_actions)));
        }
        if !(0.0..=1.0).contains(&config.slip) {
            return Err(EnvError::Layout(format!("slip must lie in [0, 1], got {}", config.slip)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let built = generator.build(&mut rng)?;
        let pose = built.layout.start;
        Ok(Self {
            generator,
            layout: built.layout,
            config,
            rng,
            pose,
            carrying: None,
            steps: 0,
            over: false,
            start_override: None,
            scenario: built.scenario,
            regenerations: built.regenerations,
        })
    }

    /// Same dynamics and rng stream, started from `start` instead of the layout's start.
    pub fn shifted_eval(&self, start: Pose) -> Result<Self, EnvError> {
        self.layout.check_start(start)?;
        let mut env = self.clone();
        env.start_override = Some(start);
        Ok(env)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut GridConfig {
        &mut self.config
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn n_actions(&self) -> usize {
        self.config.n_actions
    }

    /// Scenario index of the current episode, for randomized multi-skill layouts.
    pub fn scenario(&self) -> Option<usize> {
        self.scenario
    }

    /// Layouts discarded because the goal was unreachable.
    pub fn regenerations(&self) -> u64 {
        self.regenerations
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state(&self) -> AgentState {
        AgentState { pose: self.pose, carrying: self.carrying }
    }

    /// Places the agent without touching the layout or the step counter.
    pub fn set_state(&mut self, state: AgentState) {
        self.pose = state.pose;
        self.carrying = state.carrying;
        self.over = false;
    }

    /// Rebuilds the layout (undoing pickups and opened doors) and places the agent.
    pub fn reset(&mut self) -> GridObs {
        let built = self
            .generator
            .build(&mut self.rng)
            .expect("generator succeeded once with the same parameters");
        self.layout = built.layout;
        self.scenario = built.scenario;
        self.regenerations += built.regenerations;
        self.pose = self.start_override.unwrap_or(self.layout.start);
        self.carrying = None;
        self.steps = 0;
        self.over = false;
        self.observe(Effect::None)
    }

    pub fn observe(&self, effect: Effect) -> GridObs {
        let mut view = [Tile::Wall; VIEW * VIEW];
        let (fx, fy) = self.pose.dir.delta();
        // Right-hand vector of the heading.
        let (rx, ry) = (-fy, fx);
        let half = (VIEW / 2) as i64;
        for row in 0..VIEW {
            let ahead = (VIEW - 1 - row) as i64;
            for col in 0..VIEW {
                let side = col as i64 - half;
                let x = self.pose.x as i64 + ahead * fx + side * rx;
                let y = self.pose.y as i64 + ahead * fy + side * ry;
                view[row * VIEW + col] = self.layout.get_signed(x, y);
            }
        }
        GridObs {
            id: GridObs::index(self.layout.width, self.pose, self.carrying),
            pose: self.pose,
            carrying: self.carrying,
            tile: self.layout.get(self.pose.x, self.pose.y),
            effect,
            view,
        }
    }

    fn front(&self) -> Option<(usize, usize)> {
        let (dx, dy) = self.pose.dir.delta();
        let x = self.pose.x as i64 + dx;
        let y = self.pose.y as i64 + dy;
        (x >= 0 && y >= 0 && (x as usize) < self.layout.width && (y as usize) < self.layout.height)
            .then_some((x as usize, y as usize))
    }

    pub fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        if action >= self.config.n_actions {
            return Err(EnvError::InvalidAction { action, n_actions: self.config.n_actions });
        }
        if self.over {
            return Err(EnvError::EpisodeOver);
        }
        let mut action = Action::ALL[action];
        if self.config.slip > 0.0 && self.rng.gen::<f64>() < self.config.slip {
            action = Action::ALL[self.rng.gen_range(0..self.config.n_actions.min(3))];
        }
        let rewards = self.config.rewards;
        let mut reward = rewards.step;
        let mut terminated = false;
        let effect = match action {
            Action::TurnLeft => {
                self.pose.dir = self.pose.dir.left();
                Effect::None
            }
            Action::TurnRight => {
                self.pose.dir = self.pose.dir.right();
                Effect::None
            }
            Action::Forward => match self.front() {
                Some((x, y)) if self.layout.get(x, y).passable() => {
                    self.pose.x = x;
                    self.pose.y = y;
                    match self.layout.get(x, y) {
                        Tile::Goal => {
                            reward = rewards.goal;
                            terminated = true;
                        }
                        Tile::Lava => {
                            reward = rewards.lava;
                            terminated = true;
                        }
                        Tile::Spike => reward = rewards.spike,
                        _ => {}
                    }
                    Effect::Moved
                }
                _ => Effect::Blocked,
            },
            Action::Pickup => match self.front() {
                Some((x, y)) if self.carrying.is_none() => match self.layout.get(x, y) {
                    Tile::Key(c) => {
                        self.carrying = Some(c);
                        self.layout.set(x, y, Tile::Empty);
                        Effect::PickedKey
                    }
                    _ => Effect::None,
                },
                _ => Effect::None,
            },
            Action::Drop => match (self.front(), self.carrying) {
                (Some((x, y)), Some(c)) if self.layout.get(x, y) == Tile::Empty => {
                    self.layout.set(x, y, Tile::Key(c));
                    self.carrying = None;
                    Effect::DroppedKey
                }
                _ => Effect::None,
            },
            Action::Toggle => match self.front() {
                Some((x, y)) => match self.layout.get(x, y) {
                    Tile::Door { color, locked: true } if self.carrying == Some(color) => {
                        self.layout.set(x, y, Tile::Door { color, locked: false });
                        Effect::OpenedDoor
                    }
                    _ => Effect::None,
                },
                None => Effect::None,
            },
        };
        self.steps += 1;
        let truncated = !terminated && self.steps >= self.config.horizon;
        self.over = terminated || truncated;
        Ok(Step { obs: self.observe(effect), reward, terminated, truncated })
    }

    /// One character per cell with the agent drawn as an arrow.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity((self.layout.width + 1) * self.layout.height);
        for y in 0..self.layout.height {
            for x in 0..self.layout.width {
                let c = if (x, y) == (self.pose.x, self.pose.y) {
                    self.pose.dir.arrow()
                } else {
                    match self.layout.get(x, y) {
                        Tile::Empty => '.',
                        Tile::Wall => '#',
                        Tile::Gap => '=',
                        Tile::Goal => '*',
                        Tile::Spike => '^',
                        Tile::Lava => '~',
                        Tile::Key(c) => c.letter(),
                        Tile::Door { color, locked: true } => color.letter().to_ascii_uppercase(),
                        Tile::Door { .. } => '/',
                    }
                };
                out.push(c);
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for GridWorld {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
