//! Fixed layouts, randomized generators and a search oracle over layouts.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Action, Color, Dir, GridConfig, Layout, Pose, Tile, COLORS};
use super::EnvError;

/// Attempts before a generator gives up on producing a solvable layout.
const MAX_ATTEMPTS: u64 = 10_000;

/// Three rooms side by side (13x7), joined by one gap in each dividing wall.
/// The gaps sit at opposite ends so the route zigzags.
pub fn three_room() -> Layout {
    let mut l = Layout::walled(13, 7, Pose::new(1, 1, Dir::East));
    for y in 1..6 {
        l.set(4, y, Tile::Wall);
        l.set(8, y, Tile::Wall);
    }
    l.set(4, 5, Tile::Gap);
    l.set(8, 1, Tile::Gap);
    l.set(11, 5, Tile::Goal);
    l
}

/// Two rooms (11x7) joined by a gap at the top of the dividing wall; start
/// bottom-left, goal bottom-right.
pub fn shaping_rooms() -> Layout {
    let mut l = Layout::walled(11, 7, Pose::new(1, 5, Dir::East));
    for y in 1..6 {
        l.set(5, y, Tile::Wall);
    }
    l.set(5, 1, Tile::Gap);
    l.set(9, 5, Tile::Goal);
    l
}

/// Contents of one obstacle-course room. The wall after a `Key` room holds a
/// locked door of the key's colour; every other dividing wall holds a gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Section {
    Spikes,
    Lava,
    Key,
    /// Goal in the room's bottom-right cell.
    Goal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseSpec {
    pub sections: Vec<Section>,
    /// Grid height including walls.
    pub height: usize,
    pub spikes_per_room: usize,
    pub lava_per_room: usize,
    /// Cells of the first room kept free of hazards (start poses).
    pub keep_clear: Vec<(usize, usize)>,
}

impl CourseSpec {
    /// Six rooms on a 25x9 grid: spikes, lava, key, spikes, lava, goal.
    pub fn standard() -> Self {
        Self {
            sections: vec![Section::Spikes, Section::Lava, Section::Key, Section::Spikes, Section::Lava, Section::Goal],
            height: 9,
            spikes_per_room: 3,
            lava_per_room: 2,
            keep_clear: vec![(1, 1), (1, 4)],
        }
    }

    pub fn width(&self) -> usize {
        4 * self.sections.len() + 1
    }
}

/// Scenario of the randomized skill environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Skill {
    Lava,
    Gap,
    Door,
}

impl Skill {
    pub const ALL: [Skill; 3] = [Skill::Lava, Skill::Gap, Skill::Door];

    pub fn name(self) -> &'static str {
        match self {
            Skill::Lava => "lava",
            Skill::Gap => "gap",
            Skill::Door => "door",
        }
    }
}

/// Source of the layout used at every reset.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Fixed(Layout),
    ObstacleCourse(CourseSpec),
    /// 9x9 two-room layout whose divider is a lava strip, a gapped wall or a
    /// wall with two locked doors, chosen uniformly per episode.
    Skill,
}

/// A generated layout with its bookkeeping.
#[derive(Debug, Clone)]
pub struct Built {
    pub layout: Layout,
    pub scenario: Option<usize>,
    /// Unsolvable candidates discarded before this one.
    pub regenerations: u64,
}

impl Generator {
    pub fn randomizes(&self) -> bool {
        !matches!(self, Generator::Fixed(_))
    }

    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Built, EnvError> {
        match self {
            Generator::Fixed(layout) => Ok(Built { layout: layout.clone(), scenario: None, regenerations: 0 }),
            Generator::ObstacleCourse(spec) => {
                regenerate(rng, |rng| Some((obstacle_course(spec, rng)?, None)))
            }
            Generator::Skill => regenerate(rng, |rng| {
                let k = rng.gen_range(0..Skill::ALL.len());
                Some((skill_layout(Skill::ALL[k], rng), Some(k)))
            }),
        }
    }
}

fn regenerate<R: Rng + ?Sized>(
    rng: &mut R,
    mut candidate: impl FnMut(&mut R) -> Option<(Layout, Option<usize>)>,
) -> Result<Built, EnvError> {
    for attempt in 0..MAX_ATTEMPTS {
        if let Some((layout, scenario)) = candidate(rng) {
            if reachable(&layout, true) {
                return Ok(Built { layout, scenario, regenerations: attempt });
            }
        }
    }
    Err(EnvError::Layout(format!("no solvable layout after {MAX_ATTEMPTS} attempts")))
}

/// Random interior cell of the room spanning columns `x0..x0 + 3`.
fn room_cell<R: Rng + ?Sized>(rng: &mut R, x0: usize, height: usize) -> (usize, usize) {
    (rng.gen_range(x0..x0 + 3), rng.gen_range(1..height - 1))
}

fn obstacle_course<R: Rng + ?Sized>(spec: &CourseSpec, rng: &mut R) -> Option<Layout> {
    let (w, h) = (spec.width(), spec.height);
    if spec.sections.is_empty() || h < 4 {
        return None;
    }
    let mut l = Layout::walled(w, h, Pose::new(1, 1, Dir::East));
    let mut colors = COLORS.to_vec();
    colors.shuffle(rng);
    let mut key_colors = colors.into_iter().cycle();
    let free = |l: &Layout, (x, y): (usize, usize)| l.get(x, y) == Tile::Empty && !spec.keep_clear.contains(&(x, y));
    for (i, section) in spec.sections.iter().enumerate() {
        let x0 = 4 * i + 1;
        let place = |l: &mut Layout, count: usize, tile: Tile, rng: &mut R| {
            let mut placed = 0;
            while placed < count {
                let cell = room_cell(rng, x0, h);
                if free(l, cell) {
                    l.set(cell.0, cell.1, tile);
                    placed += 1;
                }
            }
        };
        let divider = x0 + 3;
        let last = i + 1 == spec.sections.len();
        if !last {
            for y in 1..h - 1 {
                l.set(divider, y, Tile::Wall);
            }
        }
        match section {
            Section::Spikes => place(&mut l, spec.spikes_per_room, Tile::Spike, rng),
            Section::Lava => place(&mut l, spec.lava_per_room, Tile::Lava, rng),
            Section::Key => {
                let color = key_colors.next().expect("cycle");
                place(&mut l, 1, Tile::Key(color), rng);
                if !last {
                    l.set(divider, rng.gen_range(1..h - 1), Tile::Door { color, locked: true });
                }
            }
            Section::Goal => l.set(x0 + 2, h - 2, Tile::Goal),
        }
        if !last && *section != Section::Key {
            l.set(divider, rng.gen_range(1..h - 1), Tile::Gap);
        }
    }
    if l.find(|t| t == Tile::Goal).is_empty() {
        l.set(w - 2, h - 2, Tile::Goal);
    }
    Some(l)
}

/// One skill-environment instance.
pub fn skill_layout<R: Rng + ?Sized>(skill: Skill, rng: &mut R) -> Layout {
    let mut l = Layout::walled(9, 9, Pose::new(1, 1, Dir::East));
    l.set(7, 7, Tile::Goal);
    let opening = rng.gen_range(1..8);
    match skill {
        Skill::Lava => {
            for y in 1..8 {
                if y != opening {
                    l.set(4, y, Tile::Lava);
                }
            }
        }
        Skill::Gap => {
            for y in 1..8 {
                l.set(4, y, Tile::Wall);
            }
            l.set(4, opening, Tile::Gap);
        }
        Skill::Door => {
            for y in 1..8 {
                l.set(4, y, Tile::Wall);
            }
            let mut colors = COLORS.to_vec();
            colors.shuffle(rng);
            let mut rows: Vec<usize> = (1..8).collect();
            rows.shuffle(rng);
            l.set(4, rows[0], Tile::Door { color: colors[0], locked: true });
            l.set(4, rows[1], Tile::Door { color: colors[1], locked: true });
            let key = colors[rng.gen_range(0..2)];
            loop {
                let (x, y) = (rng.gen_range(1..4), rng.gen_range(1..8));
                if (x, y) != (1, 1) {
                    l.set(x, y, Tile::Key(key));
                    break;
                }
            }
        }
    }
    l
}

/// Whether the goal can be reached from the start without entering lava.
/// With `use_keys` false the agent may not pick up keys.
pub fn reachable(layout: &Layout, use_keys: bool) -> bool {
    // Orientation never limits reachability, so positions suffice.
    let keys = layout.find(|t| matches!(t, Tile::Key(_)));
    let doors = layout.find(|t| matches!(t, Tile::Door { locked: true, .. }));
    if keys.len() > 8 || doors.len() > 8 {
        return false;
    }
    type Node = (usize, usize, u8, u8, u8);
    let start: Node = (layout.start.x, layout.start.y, 0, 0, 0);
    let mut seen = std::collections::HashSet::new();
    let mut queue = VecDeque::from([start]);
    seen.insert(start);
    while let Some((x, y, carry, picked, opened)) = queue.pop_front() {
        if layout.get(x, y) == Tile::Goal {
            return true;
        }
        let tile_at = |cx: usize, cy: usize| -> Tile {
            if let Some(k) = keys.iter().position(|&p| p == (cx, cy)) {
                if picked & (1 << k) != 0 {
                    return Tile::Empty;
                }
            }
            if let Some(d) = doors.iter().position(|&p| p == (cx, cy)) {
                if opened & (1 << d) != 0 {
                    return Tile::Gap;
                }
            }
            layout.get(cx, cy)
        };
        for dir in Dir::ALL {
            let (dx, dy) = dir.delta();
            let (nx, ny) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
            if nx >= layout.width || ny >= layout.height {
                continue;
            }
            let mut next = None;
            match tile_at(nx, ny) {
                Tile::Lava => {}
                t if t.passable() => next = Some((nx, ny, carry, picked, opened)),
                Tile::Key(c) if use_keys && carry == 0 => {
                    let k = keys.iter().position(|&p| p == (nx, ny)).expect("key listed");
                    next = Some((x, y, c.index() as u8 + 1, picked | (1 << k), opened));
                }
                Tile::Door { color, locked: true } if carry == color.index() as u8 + 1 => {
                    let d = doors.iter().position(|&p| p == (nx, ny)).expect("door listed");
                    next = Some((x, y, carry, picked, opened | (1 << d)));
                }
                _ => {}
            }
            if let Some(n) = next {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    false
}

/// Best undiscounted return from the start and an action sequence achieving it,
/// by Dijkstra over pose, carried key and layout changes. Drops are not used.
pub fn optimal_plan(layout: &Layout, config: &GridConfig) -> Option<(f64, Vec<usize>)> {
    #[derive(Clone, Copy, PartialEq, Eq, Hash)]
    struct Node {
        pose: Pose,
        carry: Option<Color>,
        picked: u8,
        opened: u8,
    }
    struct Entry {
        cost: f64,
        steps: usize,
        node: Node,
    }
    impl PartialEq for Entry {
        fn eq(&self, o: &Self) -> bool {
            self.cmp(o) == Ordering::Equal
        }
    }
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, o: &Self) -> Ordering {
            o.cost.total_cmp(&self.cost).then(o.steps.cmp(&self.steps))
        }
    }

    let r = config.rewards;
    if r.step > 0.0 || r.spike > 0.0 {
        return None;
    }
    let keys = layout.find(|t| matches!(t, Tile::Key(_)));
    let doors = layout.find(|t| matches!(t, Tile::Door { .. }));
    let tile_at = |n: &Node, x: usize, y: usize| -> Tile {
        if let Some(k) = keys.iter().position(|&p| p == (x, y)) {
            if n.picked & (1 << k) != 0 {
                return Tile::Empty;
            }
        }
        if let Some(d) = doors.iter().position(|&p| p == (x, y)) {
            if n.opened & (1 << d) != 0 {
                if let Tile::Door { color, .. } = layout.get(x, y) {
                    return Tile::Door { color, locked: false };
                }
            }
        }
        layout.get(x, y)
    };
    let start = Node { pose: layout.start, carry: None, picked: 0, opened: 0 };
    let mut best: HashMap<Node, f64> = HashMap::from([(start, 0.0)]);
    let mut parent: HashMap<Node, (Node, usize)> = HashMap::new();
    let mut heap = BinaryHeap::from([Entry { cost: 0.0, steps: 0, node: start }]);
    while let Some(Entry { cost, steps, node }) = heap.pop() {
        if cost > best[&node] {
            continue;
        }
        if node.pose.x == usize::MAX {
            let mut actions = Vec::new();
            let mut cur = node;
            while let Some(&(prev, a)) = parent.get(&cur) {
                actions.push(a);
                cur = prev;
            }
            actions.reverse();
            return Some((-cost, actions));
        }
        if steps >= config.horizon {
            continue;
        }
        for a in 0..config.n_actions {
            let mut next = node;
            let mut reward = r.step;
            let mut goal = false;
            let (dx, dy) = node.pose.dir.delta();
            let front = ((node.pose.x as i64 + dx) as usize, (node.pose.y as i64 + dy) as usize);
            let front_tile = if front.0 < layout.width && front.1 < layout.height {
                tile_at(&node, front.0, front.1)
            } else {
                Tile::Wall
            };
            match Action::ALL[a] {
                Action::TurnLeft => next.pose.dir = node.pose.dir.left(),
                Action::TurnRight => next.pose.dir = node.pose.dir.right(),
                Action::Forward => {
                    if !front_tile.passable() {
                        continue;
                    }
                    next.pose.x = front.0;
                    next.pose.y = front.1;
                    match front_tile {
                        Tile::Lava => continue,
                        Tile::Goal => {
                            reward = r.goal;
                            goal = true;
                        }
                        Tile::Spike => reward = r.spike,
                        _ => {}
                    }
                }
                Action::Pickup => match front_tile {
                    Tile::Key(c) if node.carry.is_none() => {
                        let k = keys.iter().position(|&p| p == front).expect("key listed");
                        next.carry = Some(c);
                        next.picked |= 1 << k;
                    }
                    _ => continue,
                },
                Action::Toggle => match front_tile {
                    Tile::Door { color, locked: true } if node.carry == Some(color) => {
                        let d = doors.iter().position(|&p| p == front).expect("door listed");
                        next.opened |= 1 << d;
                    }
                    _ => continue,
                },
                Action::Drop => continue,
            }
            if goal {
                // Goal steps end the episode; score them as a sink.
                let total = cost - reward;
                let sink = Node { pose: Pose::new(usize::MAX, usize::MAX, Dir::East), carry: None, picked: 0, opened: 0 };
                if best.get(&sink).is_none_or(|&c| total < c) {
                    best.insert(sink, total);
                    parent.insert(sink, (node, a));
                    heap.push(Entry { cost: total, steps: steps + 1, node: sink });
                }
                continue;
            }
            let c = cost - reward;
            if best.get(&next).is_none_or(|&old| c < old - 1e-12) {
                best.insert(next, c);
                parent.insert(next, (node, a));
                heap.push(Entry { cost: c, steps: steps + 1, node: next });
            }
        }
    }
    None
}
