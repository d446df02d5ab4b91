//! Two-lane highway with slow traffic.
//!
//! The observed state is `[speed, lane, proximity]`. At most one traffic
//! vehicle exists at a time. It sits `gap` steps ahead (1 to 3) in the ego
//! vehicle's path; the gap shrinks while the ego vehicle is faster than
//! traffic and grows while it is slower. Reaching the vehicle in the right
//! lane is a crash; reaching it in the left lane puts it alongside, and
//! steering back right completes the overtake.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{EnvKind, Environment, Events, Transition};
use crate::engine::StubStyle;
use crate::options::GoalTest;
use crate::space::{ActionId, ActionSet, Component, StateKey};

pub static ACTIONS: ActionSet = ActionSet::new(&["speedUp", "slowDown", "straight", "steerLeft", "steerRight"]);

pub const SPEED_UP: ActionId = ActionId(0);
pub const SLOW_DOWN: ActionId = ActionId(1);
pub const STRAIGHT: ActionId = ActionId(2);
pub const STEER_LEFT: ActionId = ActionId(3);
pub const STEER_RIGHT: ActionId = ActionId(4);

/// Proximity reading when nothing is ahead.
pub const CLEAR_AHEAD: i64 = 4;
const MAX_SPEED: i64 = 70;
const SPEED_STEP: i64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DrivingState {
    pub speed: i64,
    /// 0 is the right (correct) lane, 1 the left lane.
    pub lane: i64,
    pub proximity: i64,
}

impl DrivingState {
    pub fn new(speed: i64, lane: i64, proximity: i64) -> Self {
        DrivingState { speed, lane, proximity }
    }

    pub fn key(self) -> StateKey {
        StateKey::new(vec![
            Component::Int(self.speed),
            Component::Int(self.lane),
            Component::Int(self.proximity),
        ])
    }

    pub fn from_key(key: &StateKey) -> Option<Self> {
        match key.components() {
            [Component::Int(s), Component::Int(l), Component::Int(p)] => Some(DrivingState::new(*s, *l, *p)),
            _ => None,
        }
    }

    pub fn in_range(self) -> bool {
        (0..=MAX_SPEED).contains(&self.speed)
            && self.speed % SPEED_STEP == 0
            && (0..=1).contains(&self.lane)
            && (1..=CLEAR_AHEAD).contains(&self.proximity)
    }
}

/// Where a newly spawned vehicle appears.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpawnProximity {
    /// Uniform over 1, 2 and 3 steps ahead.
    Uniform,
    Fixed(i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DrivingConfig {
    pub speed_limit: i64,
    pub traffic_speed: i64,
    pub spawn_probability: f64,
    pub min_gap_steps: u32,
    pub spawn_proximity: SpawnProximity,
    pub reward_crash: f64,
    pub reward_wrong_lane: f64,
    pub reward_over_limit: f64,
    pub reward_too_slow: f64,
    pub reward_clear: f64,
    /// Speeds at or below this are penalized as too slow.
    pub too_slow_threshold: i64,
    pub initial_speed: i64,
}

impl Default for DrivingConfig {
    fn default() -> Self {
        DrivingConfig {
            speed_limit: 60,
            traffic_speed: 30,
            spawn_probability: 0.1,
            min_gap_steps: 3,
            spawn_proximity: SpawnProximity::Uniform,
            reward_crash: -8.0,
            reward_wrong_lane: -5.0,
            reward_over_limit: -6.0,
            reward_too_slow: -6.0,
            reward_clear: 8.0,
            too_slow_threshold: 50,
            initial_speed: 60,
        }
    }
}

impl DrivingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.spawn_probability) {
            return Err("spawn probability must lie in [0, 1]".into());
        }
        for (name, v) in [
            ("speed limit", self.speed_limit),
            ("traffic speed", self.traffic_speed),
            ("too-slow threshold", self.too_slow_threshold),
            ("initial speed", self.initial_speed),
        ] {
            if !(0..=MAX_SPEED).contains(&v) {
                return Err(format!("{name} must lie in [0, {MAX_SPEED}]"));
            }
        }
        if let SpawnProximity::Fixed(p) = self.spawn_proximity {
            if !(1..CLEAR_AHEAD).contains(&p) {
                return Err("fixed spawn proximity must lie in [1, 3]".into());
            }
        }
        Ok(())
    }

    pub fn goal(&self) -> DrivingState {
        DrivingState::new(self.speed_limit, 0, CLEAR_AHEAD)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DrivingEvents {
    pub crash: bool,
    pub lane_violation: bool,
    pub speed_violation: bool,
    pub too_slow: bool,
    /// No penalty applied and the road ahead is clear.
    pub clear: bool,
    pub vehicle_encountered: bool,
    pub vehicle_overtaken: bool,
}

impl DrivingEvents {
    pub fn to_events(self) -> Events {
        let mut e = Events::empty();
        e.set(Events::CRASH, self.crash);
        e.set(Events::LANE_VIOLATION, self.lane_violation);
        e.set(Events::SPEED_VIOLATION, self.speed_violation);
        e.set(Events::TOO_SLOW, self.too_slow);
        e.set(Events::CLEAR, self.clear);
        e.set(Events::VEHICLE_ENCOUNTERED, self.vehicle_encountered);
        e.set(Events::VEHICLE_OVERTAKEN, self.vehicle_overtaken);
        e
    }

    /// Sum of the reward terms for the flagged conditions.
    pub fn reward(&self, config: &DrivingConfig) -> f64 {
        let terms = [
            (self.crash, config.reward_crash),
            (self.lane_violation, config.reward_wrong_lane),
            (self.speed_violation, config.reward_over_limit),
            (self.too_slow, config.reward_too_slow),
            (self.clear, config.reward_clear),
        ];
        terms.iter().filter(|(on, _)| *on).map(|(_, r)| r).sum()
    }
}

/// Full simulator state, including what the observation hides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DrivingSim {
    speed: i64,
    lane: i64,
    /// Steps until the ego vehicle reaches traffic; `Some(0)` means alongside.
    vehicle: Option<i64>,
    /// Steps since the last vehicle left.
    since_left: u32,
}

impl DrivingSim {
    pub fn new(config: &DrivingConfig) -> Self {
        DrivingSim {
            speed: config.initial_speed,
            lane: 0,
            vehicle: None,
            since_left: 0,
        }
    }

    /// Starts from an observed state; a proximity below 4 places a vehicle that far ahead.
    pub fn from_state(state: DrivingState, min_gap_steps: u32) -> Self {
        DrivingSim {
            speed: state.speed,
            lane: state.lane,
            vehicle: (state.proximity < CLEAR_AHEAD).then_some(state.proximity),
            since_left: min_gap_steps,
        }
    }

    pub fn observe(&self) -> DrivingState {
        let proximity = match self.vehicle {
            Some(gap) if gap > 0 => gap,
            _ => CLEAR_AHEAD,
        };
        DrivingState::new(self.speed, self.lane, proximity)
    }

    fn vehicle_left(&mut self) {
        self.vehicle = None;
        self.since_left = 0;
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        action: ActionId,
        config: &DrivingConfig,
        rng: &mut R,
    ) -> (DrivingState, f64, DrivingEvents) {
        let mut ev = DrivingEvents::default();
        match action {
            SPEED_UP => self.speed = (self.speed + SPEED_STEP).min(MAX_SPEED),
            SLOW_DOWN => self.speed = (self.speed - SPEED_STEP).max(0),
            STEER_LEFT => self.lane = 1,
            STEER_RIGHT => self.lane = 0,
            _ => {}
        }

        match self.vehicle {
            Some(0) => {
                if self.lane == 0 {
                    ev.vehicle_overtaken = true;
                    self.vehicle_left();
                }
            }
            Some(gap) => {
                let gap = match self.speed.cmp(&config.traffic_speed) {
                    std::cmp::Ordering::Greater => gap - 1,
                    std::cmp::Ordering::Less => gap + 1,
                    std::cmp::Ordering::Equal => gap,
                };
                self.vehicle = Some(gap);
                if gap == 0 && self.lane == 0 {
                    ev.crash = true;
                    self.speed = 0;
                    self.vehicle_left();
                } else if gap >= CLEAR_AHEAD {
                    self.vehicle_left();
                }
            }
            None => {
                self.since_left += 1;
                if self.since_left >= config.min_gap_steps && rng.random::<f64>() < config.spawn_probability {
                    let gap = match config.spawn_proximity {
                        SpawnProximity::Uniform => rng.random_range(1..CLEAR_AHEAD),
                        SpawnProximity::Fixed(p) => p,
                    };
                    self.vehicle = Some(gap);
                    ev.vehicle_encountered = true;
                }
            }
        }

        let obs = self.observe();
        ev.lane_violation = obs.lane == 1;
        ev.speed_violation = obs.speed > config.speed_limit;
        ev.too_slow = obs.speed <= config.too_slow_threshold;
        let penalized = ev.crash || ev.lane_violation || ev.speed_violation || ev.too_slow;
        ev.clear = !penalized && obs.lane == 0 && obs.proximity == CLEAR_AHEAD;
        (obs, ev.reward(config), ev)
    }
}

/// The driving simulator with its own random stream.
pub struct DrivingEnv {
    config: DrivingConfig,
    sim: DrivingSim,
    rng: ChaCha8Rng,
}

impl DrivingEnv {
    pub fn new(config: DrivingConfig, rng: ChaCha8Rng) -> Self {
        let sim = DrivingSim::new(&config);
        DrivingEnv { config, sim, rng }
    }

    pub fn config(&self) -> &DrivingConfig {
        &self.config
    }

    pub fn state(&self) -> DrivingState {
        self.sim.observe()
    }

    /// Replaces the simulator state, e.g. to start from a given observation.
    pub fn set_sim(&mut self, sim: DrivingSim) {
        self.sim = sim;
    }
}

impl GoalTest for DrivingEnv {
    fn is_goal_state(&self, state: &StateKey) -> bool {
        DrivingState::from_key(state) == Some(self.config.goal())
    }
}

impl Environment for DrivingEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::Driving
    }

    fn actions(&self) -> &'static ActionSet {
        &ACTIONS
    }

    fn observe(&self) -> StateKey {
        self.sim.observe().key()
    }

    fn step(&mut self, action: ActionId) -> Transition {
        let (next, reward, ev) = self.sim.step(action, &self.config, &mut self.rng);
        Transition {
            next_state: next.key(),
            reward,
            terminal: false,
            events: ev.to_events(),
        }
    }

    fn reset(&mut self) {
        self.sim = DrivingSim::new(&self.config);
    }

    fn is_episodic(&self) -> bool {
        false
    }

    fn stub_style(&self) -> StubStyle {
        StubStyle::Tight
    }
}
