//! Simulated environments.

pub mod driving;
pub mod warehouse;

use std::fmt;
use std::str::FromStr;

use bitflags::bitflags;

use crate::engine::StubStyle;
use crate::options::GoalTest;
use crate::space::{ActionId, ActionSet, StateKey};

bitflags! {
    /// Conditions flagged by one environment step.
    #[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
    pub struct Events: u16 {
        const CRASH = 1;
        const LANE_VIOLATION = 1 << 1;
        const SPEED_VIOLATION = 1 << 2;
        const TOO_SLOW = 1 << 3;
        const CLEAR = 1 << 4;
        const VEHICLE_ENCOUNTERED = 1 << 5;
        const VEHICLE_OVERTAKEN = 1 << 6;
        const PICKUP = 1 << 7;
        const DELIVERY = 1 << 8;
        const INCORRECT_PICKUP = 1 << 9;
        const INCORRECT_DROPOFF = 1 << 10;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub next_state: StateKey,
    pub reward: f64,
    pub terminal: bool,
    pub events: Events,
}

/// A stateful environment owned by one experiment.
pub trait Environment: GoalTest {
    fn kind(&self) -> EnvKind;

    fn actions(&self) -> &'static ActionSet;

    fn observe(&self) -> StateKey;

    fn step(&mut self, action: ActionId) -> Transition;

    /// Starts a new episode. Continuing environments restart from their initial state.
    fn reset(&mut self);

    fn is_episodic(&self) -> bool;

    fn stub_style(&self) -> StubStyle {
        StubStyle::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvKind {
    Driving,
    Warehouse,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Driving => "driving",
            EnvKind::Warehouse => "warehouse",
        }
    }

    pub fn actions(self) -> &'static ActionSet {
        match self {
            EnvKind::Driving => &driving::ACTIONS,
            EnvKind::Warehouse => &warehouse::ACTIONS,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "driving" => Ok(EnvKind::Driving),
            "warehouse" => Ok(EnvKind::Warehouse),
            _ => Err(format!("unknown environment `{s}` (expected driving or warehouse)")),
        }
    }
}
