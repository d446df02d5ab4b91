//! Experiment configuration: defaults, a flat TOML file, and flag overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::HarnessError;
use crate::engine::{Budget, OptionFilter, RewardSource};
use crate::env::driving::{DrivingConfig, SpawnProximity};
use crate::env::warehouse::WarehouseConfig;
use crate::env::EnvKind;
use crate::rl::{LearningParams, OptionDiscount};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub seed: u64,
    /// Primitive learning budget for continuing environments.
    pub steps: u64,
    /// Primitive learning budget for episodic environments.
    pub episodes: u64,
    /// Option-learning budget; defaults to the primitive budget.
    pub option_steps: Option<u64>,
    pub option_episodes: Option<u64>,
    /// Exploitation budget; defaults to the primitive budget.
    pub eval_steps: Option<u64>,
    pub eval_episodes: Option<u64>,
    pub eval_epsilon: f64,
    pub batch_size: usize,
    pub max_option_length: usize,
    pub max_episode_steps: u64,
    /// Learning parameters; `exploration_steps` is filled per phase unless
    /// `fixed_exploration_steps` is set.
    pub learning: LearningParams,
    pub fixed_exploration_steps: Option<u64>,
    pub reward_source: RewardSource,
    pub filter: OptionFilter,
    pub min_option_visits: u64,
    pub target: String,
    pub driving: DrivingConfig,
    pub warehouse: WarehouseConfig,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(env: EnvKind) -> Self {
        ExperimentConfig {
            env,
            seed: 1,
            steps: 8000,
            episodes: 600,
            option_steps: None,
            option_episodes: None,
            eval_steps: None,
            eval_episodes: None,
            eval_epsilon: 0.001,
            batch_size: 500,
            max_option_length: 8,
            max_episode_steps: 1000,
            learning: LearningParams::default(),
            fixed_exploration_steps: None,
            reward_source: RewardSource::Environment,
            filter: OptionFilter::default(),
            min_option_visits: 1,
            target: crate::engine::DEFAULT_TARGET.to_string(),
            driving: DrivingConfig::default(),
            warehouse: WarehouseConfig::default(),
            out: None,
        }
    }

    pub fn episodic(&self) -> bool {
        self.env == EnvKind::Warehouse
    }

    pub fn primitive_budget(&self) -> Budget {
        if self.episodic() {
            Budget::Episodes(self.episodes)
        } else {
            Budget::Steps(self.steps)
        }
    }

    pub fn option_budget(&self) -> Budget {
        match self.primitive_budget() {
            Budget::Steps(n) => Budget::Steps(self.option_steps.unwrap_or(n)),
            Budget::Episodes(n) => Budget::Episodes(self.option_episodes.unwrap_or(n)),
        }
    }

    pub fn eval_budget(&self) -> Budget {
        match self.primitive_budget() {
            Budget::Steps(n) => Budget::Steps(self.eval_steps.unwrap_or(n)),
            Budget::Episodes(n) => Budget::Episodes(self.eval_episodes.unwrap_or(n)),
        }
    }

    /// Learning parameters for a phase with the given budget: ε switches at
    /// half of it unless a fixed switch point is configured.
    pub fn params_for(&self, budget: Budget) -> LearningParams {
        LearningParams {
            exploration_steps: self.fixed_exploration_steps.unwrap_or(budget.amount() / 2),
            ..self.learning.clone()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |m: String| Err(HarnessError::Config(m));
        if self.batch_size == 0 {
            return cfg("batch size must be positive".into());
        }
        if self.max_option_length == 0 {
            return cfg("maximum option length must be positive".into());
        }
        if self.max_episode_steps == 0 {
            return cfg("maximum episode length must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.eval_epsilon) {
            return cfg("evaluation epsilon must lie in [0, 1]".into());
        }
        if self.target.is_empty() {
            return cfg("stub target must not be empty".into());
        }
        self.params_for(self.primitive_budget())
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.driving.validate().map_err(HarnessError::Config)?;
        self.warehouse.validate().map_err(HarnessError::Config)?;
        Ok(())
    }

    /// Applies every key present in a flat TOML file.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        self.apply_str(&text)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), HarnessError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        file.apply(self)
    }
}

/// Every key the configuration file accepts.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    env: Option<String>,
    seed: Option<u64>,
    steps: Option<u64>,
    episodes: Option<u64>,
    option_steps: Option<u64>,
    option_episodes: Option<u64>,
    eval_steps: Option<u64>,
    eval_episodes: Option<u64>,
    eval_epsilon: Option<f64>,
    batch_size: Option<usize>,
    max_option_length: Option<usize>,
    max_episode_steps: Option<u64>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    epsilon_explore: Option<f64>,
    epsilon_exploit: Option<f64>,
    exploration_steps: Option<u64>,
    option_discount: Option<String>,
    reward_source: Option<String>,
    min_option_length: Option<usize>,
    require_goal: Option<bool>,
    min_option_visits: Option<u64>,
    target: Option<String>,
    out: Option<PathBuf>,

    driving_speed_limit: Option<i64>,
    driving_traffic_speed: Option<i64>,
    driving_spawn_probability: Option<f64>,
    driving_min_gap_steps: Option<u32>,
    /// 0 for uniform over 1..=3, otherwise a fixed proximity.
    driving_spawn_proximity: Option<i64>,
    driving_too_slow_threshold: Option<i64>,
    driving_initial_speed: Option<i64>,
    driving_reward_crash: Option<f64>,
    driving_reward_wrong_lane: Option<f64>,
    driving_reward_over_limit: Option<f64>,
    driving_reward_too_slow: Option<f64>,
    driving_reward_clear: Option<f64>,

    warehouse_n: Option<i64>,
    warehouse_start: Option<(i64, i64)>,
    warehouse_pickup: Option<(i64, i64)>,
    warehouse_dropoff: Option<(i64, i64)>,
    warehouse_reward_dropoff: Option<f64>,
    warehouse_reward_pickup: Option<f64>,
    warehouse_reward_incorrect: Option<f64>,
    warehouse_reward_step: Option<f64>,
    warehouse_randomize_pickup: Option<bool>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn parse_option_discount(s: &str) -> Result<OptionDiscount, HarnessError> {
    match s {
        "per-step" | "perStep" => Ok(OptionDiscount::PerStep),
        "flat" => Ok(OptionDiscount::Flat),
        _ => Err(HarnessError::Config(format!("unknown option discount `{s}`"))),
    }
}

pub fn parse_reward_source(s: &str) -> Result<RewardSource, HarnessError> {
    match s {
        "environment" => Ok(RewardSource::Environment),
        "fixed-positive" | "fixedPositive" => Ok(RewardSource::FixedPositive),
        "frequency" => Ok(RewardSource::Frequency),
        _ => Err(HarnessError::Config(format!("unknown reward source `{s}`"))),
    }
}

impl ConfigFile {
    fn apply(self, c: &mut ExperimentConfig) -> Result<(), HarnessError> {
        if let Some(env) = self.env {
            c.env = env.parse().map_err(HarnessError::Config)?;
        }
        set(&mut c.seed, self.seed);
        set(&mut c.steps, self.steps);
        set(&mut c.episodes, self.episodes);
        c.option_steps = self.option_steps.or(c.option_steps);
        c.option_episodes = self.option_episodes.or(c.option_episodes);
        c.eval_steps = self.eval_steps.or(c.eval_steps);
        c.eval_episodes = self.eval_episodes.or(c.eval_episodes);
        set(&mut c.eval_epsilon, self.eval_epsilon);
        set(&mut c.batch_size, self.batch_size);
        set(&mut c.max_option_length, self.max_option_length);
        set(&mut c.max_episode_steps, self.max_episode_steps);
        set(&mut c.learning.alpha, self.alpha);
        set(&mut c.learning.gamma, self.gamma);
        set(&mut c.learning.epsilon_explore, self.epsilon_explore);
        set(&mut c.learning.epsilon_exploit, self.epsilon_exploit);
        c.fixed_exploration_steps = self.exploration_steps.or(c.fixed_exploration_steps);
        if let Some(d) = self.option_discount {
            c.learning.option_discount = parse_option_discount(&d)?;
        }
        if let Some(r) = self.reward_source {
            c.reward_source = parse_reward_source(&r)?;
        }
        set(&mut c.filter.min_length, self.min_option_length);
        set(&mut c.filter.require_goal, self.require_goal);
        set(&mut c.min_option_visits, self.min_option_visits);
        set(&mut c.target, self.target);
        c.out = self.out.or(c.out.take());

        let d = &mut c.driving;
        set(&mut d.speed_limit, self.driving_speed_limit);
        set(&mut d.traffic_speed, self.driving_traffic_speed);
        set(&mut d.spawn_probability, self.driving_spawn_probability);
        set(&mut d.min_gap_steps, self.driving_min_gap_steps);
        if let Some(p) = self.driving_spawn_proximity {
            d.spawn_proximity = if p == 0 { SpawnProximity::Uniform } else { SpawnProximity::Fixed(p) };
        }
        set(&mut d.too_slow_threshold, self.driving_too_slow_threshold);
        set(&mut d.initial_speed, self.driving_initial_speed);
        set(&mut d.reward_crash, self.driving_reward_crash);
        set(&mut d.reward_wrong_lane, self.driving_reward_wrong_lane);
        set(&mut d.reward_over_limit, self.driving_reward_over_limit);
        set(&mut d.reward_too_slow, self.driving_reward_too_slow);
        set(&mut d.reward_clear, self.driving_reward_clear);

        let w = &mut c.warehouse;
        set(&mut w.n, self.warehouse_n);
        set(&mut w.start, self.warehouse_start);
        set(&mut w.pickup, self.warehouse_pickup);
        set(&mut w.dropoff, self.warehouse_dropoff);
        set(&mut w.reward_dropoff, self.warehouse_reward_dropoff);
        set(&mut w.reward_pickup, self.warehouse_reward_pickup);
        set(&mut w.reward_incorrect, self.warehouse_reward_incorrect);
        set(&mut w.reward_step, self.warehouse_reward_step);
        set(&mut w.randomize_pickup, self.warehouse_randomize_pickup);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::new(EnvKind::Driving);
        assert!(c.validate().is_ok());
        assert_eq!(c.primitive_budget(), Budget::Steps(8000));
        assert_eq!(c.params_for(c.primitive_budget()).exploration_steps, 4000);
        let w = ExperimentConfig::new(EnvKind::Warehouse);
        assert_eq!(w.primitive_budget(), Budget::Episodes(600));
        assert_eq!(w.eval_budget(), Budget::Episodes(600));
    }

    #[test]
    fn file_overrides() {
        let mut c = ExperimentConfig::new(EnvKind::Driving);
        c.apply_str(
            "env = \"warehouse\"\nseed = 9\nbatch_size = 7\noption_discount = \"flat\"\n\
             warehouse_pickup = [1, 1]\ndriving_spawn_proximity = 3\n",
        )
        .unwrap();
        assert_eq!(c.env, EnvKind::Warehouse);
        assert_eq!(c.seed, 9);
        assert_eq!(c.batch_size, 7);
        assert_eq!(c.learning.option_discount, OptionDiscount::Flat);
        assert_eq!(c.warehouse.pickup, (1, 1));
        assert_eq!(c.driving.spawn_proximity, SpawnProximity::Fixed(3));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let mut c = ExperimentConfig::new(EnvKind::Driving);
        assert!(matches!(c.apply_str("colour = 3"), Err(HarnessError::Config(_))));
        assert!(matches!(c.apply_str("reward_source = \"luck\""), Err(HarnessError::Config(_))));
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }
}
