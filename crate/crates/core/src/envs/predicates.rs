//! Named event conditions over gridworld transitions.

use std::fmt;

use super::grid::{Effect, GridObs, Tile};
use super::EnvError;
use crate::replay::{EpisodeView, EventCondition, EventSpec, Transition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predicate {
    AtGap,
    AtGoal,
    /// True termination of the episode.
    Done,
    AtSpike,
    AtLava,
    PickupKey,
    /// Opened a door or stepped into a doorway.
    AtDoor,
    /// Reward strictly above the threshold.
    RewardThreshold(f64),
    /// The agent has just spent `window` consecutive steps off spikes after
    /// stepping on one.
    Reestablish(usize),
}

impl Predicate {
    /// Parses `at-gap`, `done`, `reward-threshold(0.5)`, `reestablish(3)` and so on.
    pub fn parse(name: &str) -> Result<Self, EnvError> {
        let arg = |prefix: &str| -> Option<&str> { name.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')') };
        let bad = |why: String| EnvError::UnknownPredicate(format!("{name}: {why}"));
        Ok(match name {
            "at-gap" => Self::AtGap,
            "at-goal" => Self::AtGoal,
            "done" => Self::Done,
            "at-spike" => Self::AtSpike,
            "at-lava" => Self::AtLava,
            "pickup-key" => Self::PickupKey,
            "at-door" => Self::AtDoor,
            _ => {
                if let Some(c) = arg("reward-threshold") {
                    Self::RewardThreshold(c.trim().parse().map_err(|e| bad(format!("{e}")))?)
                } else if let Some(w) = arg("reestablish") {
                    let w: usize = w.trim().parse().map_err(|e| bad(format!("{e}")))?;
                    if w == 0 {
                        return Err(bad("window must be positive".into()));
                    }
                    Self::Reestablish(w)
                } else {
                    return Err(bad("unknown name".into()));
                }
            }
        })
    }

    pub fn holds(&self, t: &Transition<GridObs>, history: EpisodeView<'_, GridObs>) -> bool {
        let next = &t.next_state;
        match *self {
            Self::AtGap => next.tile == Tile::Gap,
            Self::AtGoal => next.tile == Tile::Goal,
            Self::Done => t.done,
            Self::AtSpike => next.tile == Tile::Spike,
            Self::AtLava => next.tile == Tile::Lava,
            Self::PickupKey => next.effect == Effect::PickedKey,
            Self::AtDoor => next.effect == Effect::OpenedDoor || matches!(next.tile, Tile::Door { .. }),
            Self::RewardThreshold(c) => t.reward > c,
            Self::Reestablish(window) => {
                let mut recent = std::iter::once(t).chain(history.iter_back());
                recent.by_ref().take(window).all(|s| s.next_state.tile != Tile::Spike)
                    && recent.next().is_some_and(|s| s.next_state.tile == Tile::Spike)
            }
        }
    }

    pub fn event_spec(self, tau: usize) -> EventSpec<GridObs> {
        EventSpec::new(self.to_string(), tau, self)
    }
}

impl EventCondition<GridObs> for Predicate {
    fn holds(&self, step: &Transition<GridObs>, history: EpisodeView<'_, GridObs>) -> bool {
        Predicate::holds(self, step, history)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AtGap => f.write_str("at-gap"),
            Self::AtGoal => f.write_str("at-goal"),
            Self::Done => f.write_str("done"),
            Self::AtSpike => f.write_str("at-spike"),
            Self::AtLava => f.write_str("at-lava"),
            Self::PickupKey => f.write_str("pickup-key"),
            Self::AtDoor => f.write_str("at-door"),
            Self::RewardThreshold(c) => write!(f, "reward-threshold({c})"),
            Self::Reestablish(w) => write!(f, "reestablish({w})"),
        }
    }
}
