//! Deterministic MiniGrid-style environments: a three-room world, a two-room
//! shaping world, a randomized obstacle course and a randomized multi-skill
//! room, with event predicates, potential shaping and exact tabular models.

mod encode;
mod grid;
mod layouts;
mod predicates;
mod shaping;

use thiserror::Error;

pub use encode::{tabularize, ObsEncoder, Tabularized};
pub use grid::{
    Action, AgentState, Color, Dir, Effect, GridConfig, GridObs, GridWorld, Layout, Pose, RewardScheme, Step, Tile,
    COLORS, VIEW,
};
pub use layouts::{
    optimal_plan, reachable, shaping_rooms, skill_layout, three_room, Built, CourseSpec, Generator, Section, Skill,
};
pub use predicates::Predicate;
pub use shaping::{PotentialShaper, Shaped};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("action {action} outside 0..{n_actions}")]
    InvalidAction { action: usize, n_actions: usize },
    #[error("episode is over; call reset")]
    EpisodeOver,
    #[error("illegal pose: {0}")]
    IllegalPose(String),
    #[error("layout: {0}")]
    Layout(String),
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
}

/// Three-room world: turn and forward actions, `+1` at the goal, `-0.1` per
/// other step, horizon 200.
pub fn three_room_env(seed: u64) -> GridWorld {
    GridWorld::new(
        Generator::Fixed(three_room()),
        GridConfig { rewards: RewardScheme::goal_and_step(), horizon: 200, slip: 0.0, n_actions: 3 },
        seed,
    )
    .expect("static layout is valid")
}

/// Two-room shaping world with the three-room reward scheme.
pub fn shaping_env(seed: u64) -> GridWorld {
    GridWorld::new(
        Generator::Fixed(shaping_rooms()),
        GridConfig { rewards: RewardScheme::goal_and_step(), horizon: 200, slip: 0.0, n_actions: 3 },
        seed,
    )
    .expect("static layout is valid")
}

/// Randomized obstacle course with all six actions and horizon 400.
pub fn obstacle_course_env(spec: CourseSpec, seed: u64) -> Result<GridWorld, EnvError> {
    GridWorld::new(
        Generator::ObstacleCourse(spec),
        GridConfig { rewards: RewardScheme::hazards(), horizon: 400, slip: 0.0, n_actions: 6 },
        seed,
    )
}

/// Randomized lava / gap / door room with horizon 200.
pub fn skill_env(seed: u64) -> GridWorld {
    GridWorld::new(
        Generator::Skill,
        GridConfig { rewards: RewardScheme::hazards(), horizon: 200, slip: 0.0, n_actions: 6 },
        seed,
    )
    .expect("skill generator is valid")
}
