//! Episodic pickup-and-delivery on an n×n grid.
//!
//! `x` is the row (north decreases it) and `y` the column (east increases it).
//! The state is `[x, y, available]` where `available` means the robot is not
//! carrying a package.

use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;

use super::{EnvKind, Environment, Events, Transition};
use crate::engine::StubStyle;
use crate::options::GoalTest;
use crate::space::{ActionId, ActionSet, Component, StateKey};
use crate::trace::TraceRecord;

pub static ACTIONS: ActionSet = ActionSet::new(&["north", "south", "east", "west", "pickup", "dropoff"]);

pub const NORTH: ActionId = ActionId(0);
pub const SOUTH: ActionId = ActionId(1);
pub const EAST: ActionId = ActionId(2);
pub const WEST: ActionId = ActionId(3);
pub const PICKUP: ActionId = ActionId(4);
pub const DROPOFF: ActionId = ActionId(5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WarehouseState {
    pub x: i64,
    pub y: i64,
    pub available: bool,
}

impl WarehouseState {
    pub fn new(x: i64, y: i64, available: bool) -> Self {
        WarehouseState { x, y, available }
    }

    pub fn pos(self) -> (i64, i64) {
        (self.x, self.y)
    }

    pub fn key(self) -> StateKey {
        StateKey::new(vec![
            Component::Int(self.x),
            Component::Int(self.y),
            Component::Bool(self.available),
        ])
    }

    pub fn from_key(key: &StateKey) -> Option<Self> {
        match key.components() {
            [Component::Int(x), Component::Int(y), Component::Bool(a)] => Some(WarehouseState::new(*x, *y, *a)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WarehouseConfig {
    pub n: i64,
    pub start: (i64, i64),
    pub pickup: (i64, i64),
    pub dropoff: (i64, i64),
    pub reward_dropoff: f64,
    pub reward_pickup: f64,
    pub reward_incorrect: f64,
    pub reward_step: f64,
    /// Draw a fresh pickup location (never the dropoff cell) each episode.
    pub randomize_pickup: bool,
}

impl Default for WarehouseConfig {
    fn default() -> Self {
        WarehouseConfig {
            n: 5,
            start: (0, 0),
            pickup: (2, 3),
            dropoff: (4, 1),
            reward_dropoff: 20.0,
            reward_pickup: 10.0,
            reward_incorrect: -10.0,
            reward_step: -1.0,
            randomize_pickup: false,
        }
    }
}

impl WarehouseConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n < 2 {
            return Err("grid size must be at least 2".into());
        }
        let inside = |(x, y): (i64, i64)| (0..self.n).contains(&x) && (0..self.n).contains(&y);
        for (name, p) in [("start", self.start), ("pickup", self.pickup), ("dropoff", self.dropoff)] {
            if !inside(p) {
                return Err(format!("{name} location {p:?} is outside the grid"));
            }
        }
        if self.pickup == self.dropoff {
            return Err("pickup and dropoff locations must differ".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarehouseStep {
    pub state: WarehouseState,
    pub reward: f64,
    pub terminal: bool,
    pub events: Events,
}

pub fn reset(config: &WarehouseConfig) -> WarehouseState {
    WarehouseState::new(config.start.0, config.start.1, true)
}

/// One step with the package at `config.pickup`.
pub fn step(state: WarehouseState, action: ActionId, config: &WarehouseConfig) -> WarehouseStep {
    let last = config.n - 1;
    let moved = |x: i64, y: i64| WarehouseStep {
        state: WarehouseState::new(x.clamp(0, last), y.clamp(0, last), state.available),
        reward: config.reward_step,
        terminal: false,
        events: Events::empty(),
    };
    let incorrect = |events| WarehouseStep {
        state,
        reward: config.reward_incorrect,
        terminal: false,
        events,
    };
    let WarehouseState { x, y, available } = state;
    match action {
        NORTH => moved(x - 1, y),
        SOUTH => moved(x + 1, y),
        EAST => moved(x, y + 1),
        WEST => moved(x, y - 1),
        PICKUP if available && state.pos() == config.pickup => WarehouseStep {
            state: WarehouseState::new(x, y, false),
            reward: config.reward_pickup,
            terminal: false,
            events: Events::PICKUP,
        },
        PICKUP => incorrect(Events::INCORRECT_PICKUP),
        DROPOFF if !available && state.pos() == config.dropoff => WarehouseStep {
            state: WarehouseState::new(x, y, true),
            reward: config.reward_dropoff,
            terminal: true,
            events: Events::DELIVERY,
        },
        DROPOFF => incorrect(Events::INCORRECT_DROPOFF),
        _ => moved(x, y),
    }
}

/// The warehouse with episode bookkeeping.
pub struct WarehouseEnv {
    config: WarehouseConfig,
    /// Pickup location for the current episode.
    episode: WarehouseConfig,
    state: WarehouseState,
    rng: ChaCha8Rng,
}

impl WarehouseEnv {
    pub fn new(config: WarehouseConfig, rng: ChaCha8Rng) -> Self {
        let mut env = WarehouseEnv {
            state: reset(&config),
            episode: config.clone(),
            config,
            rng,
        };
        env.reset();
        env
    }

    pub fn config(&self) -> &WarehouseConfig {
        &self.config
    }

    pub fn state(&self) -> WarehouseState {
        self.state
    }

    pub fn set_state(&mut self, state: WarehouseState) {
        self.state = state;
    }
}

impl GoalTest for WarehouseEnv {
    fn is_goal_state(&self, _: &StateKey) -> bool {
        false
    }

    /// A successful pickup or delivery.
    fn reaches_goal(&self, record: &TraceRecord) -> bool {
        let (Some(s), Some(n)) = (
            WarehouseState::from_key(&record.state),
            WarehouseState::from_key(&record.next_state),
        ) else {
            return false;
        };
        (record.action == PICKUP && s.available && !n.available)
            || (record.action == DROPOFF && !s.available && n.available)
    }
}

impl Environment for WarehouseEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::Warehouse
    }

    fn actions(&self) -> &'static ActionSet {
        &ACTIONS
    }

    fn observe(&self) -> StateKey {
        self.state.key()
    }

    fn step(&mut self, action: ActionId) -> Transition {
        let out = step(self.state, action, &self.episode);
        self.state = out.state;
        Transition {
            next_state: out.state.key(),
            reward: out.reward,
            terminal: out.terminal,
            events: out.events,
        }
    }

    fn reset(&mut self) {
        self.state = reset(&self.config);
        if self.config.randomize_pickup {
            let n = self.config.n;
            let cells: Vec<(i64, i64)> = (0..n)
                .flat_map(|x| (0..n).map(move |y| (x, y)))
                .filter(|c| *c != self.config.dropoff)
                .collect();
            self.episode.pickup = *cells.choose(&mut self.rng).expect("grid has cells");
        }
    }

    fn is_episodic(&self) -> bool {
        true
    }

    fn stub_style(&self) -> StubStyle {
        StubStyle::Spaced
    }
}
