//! Per-run counters and their CSV form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::engine::{EpisodeStats, EventCounts, PhaseMetrics};
use crate::env::EnvKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Baseline,
    Autocop,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Autocop => "autocop",
        })
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "autocop" => Ok(Mode::Autocop),
            _ => Err(HarnessError::Config(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub env: EnvKind,
    pub seed: u64,
    pub mode: Mode,
    pub decision_points: u64,
    pub executed_actions: u64,
    pub adaptation_actuations: u64,
    pub events: EventCounts,
    /// Decision points per exploitation episode (episodic environments).
    pub episode_decisions: Vec<u64>,
    /// Executed primitive actions per exploitation episode.
    pub episode_lengths: Vec<u64>,
    pub options_extracted: u64,
    pub states_with_options: u64,
    pub adaptations_generated: u64,
}

impl Metrics {
    pub fn from_phase(env: EnvKind, seed: u64, mode: Mode, phase: &PhaseMetrics) -> Self {
        let per_episode = |f: fn(&EpisodeStats) -> u64| phase.episodes.iter().map(f).collect();
        Metrics {
            env,
            seed,
            mode,
            decision_points: phase.decision_points,
            executed_actions: phase.executed_actions,
            adaptation_actuations: phase.adaptation_actuations,
            events: phase.events,
            episode_decisions: per_episode(|e| e.decision_points),
            episode_lengths: per_episode(|e| e.executed_actions),
            options_extracted: 0,
            states_with_options: 0,
            adaptations_generated: 0,
        }
    }

    pub fn actions_per_decision(&self) -> f64 {
        ratio(self.executed_actions, self.decision_points)
    }

    /// Crashes, lane violations and speed violations combined.
    pub fn violations(&self) -> u64 {
        self.events.crashes + self.events.lane_violations + self.events.speed_violations
    }

    pub fn per_vehicle(&self, count: u64) -> f64 {
        ratio(count, self.events.vehicles_encountered)
    }

    pub fn mean_episode_decisions(&self) -> f64 {
        mean(&self.episode_decisions)
    }

    pub fn mean_episode_length(&self) -> f64 {
        mean(&self.episode_lengths)
    }

    /// Header plus one row per entry.
    pub fn to_csv(rows: &[Metrics]) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for m in rows {
            w.serialize(Row::from(m)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Vec<Metrics>, HarnessError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        r.deserialize::<Row>().map(|row| row.map_err(csv_err)?.try_into()).collect()
    }
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Config(format!("metrics csv: {e}"))
}

pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(v: &[u64]) -> f64 {
    ratio(v.iter().sum(), v.len() as u64)
}

fn join(v: &[u64]) -> String {
    v.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

fn split(s: &str) -> Result<Vec<u64>, HarnessError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|p| p.parse().map_err(|_| HarnessError::Config(format!("bad episode list entry `{p}`"))))
        .collect()
}

/// Flat CSV record; per-episode lists are `;`-joined.
#[derive(Debug, Serialize, Deserialize)]
struct Row {
    env: String,
    seed: u64,
    mode: String,
    decision_points: u64,
    executed_actions: u64,
    adaptation_actuations: u64,
    crashes: u64,
    lane_violations: u64,
    speed_violations: u64,
    too_slow: u64,
    vehicles_encountered: u64,
    vehicles_overtaken: u64,
    pickups: u64,
    deliveries: u64,
    incorrect_pickups: u64,
    incorrect_dropoffs: u64,
    options_extracted: u64,
    states_with_options: u64,
    adaptations_generated: u64,
    episodes: u64,
    episode_decisions: String,
    episode_lengths: String,
}

impl From<&Metrics> for Row {
    fn from(m: &Metrics) -> Self {
        let e = &m.events;
        Row {
            env: m.env.to_string(),
            seed: m.seed,
            mode: m.mode.to_string(),
            decision_points: m.decision_points,
            executed_actions: m.executed_actions,
            adaptation_actuations: m.adaptation_actuations,
            crashes: e.crashes,
            lane_violations: e.lane_violations,
            speed_violations: e.speed_violations,
            too_slow: e.too_slow,
            vehicles_encountered: e.vehicles_encountered,
            vehicles_overtaken: e.vehicles_overtaken,
            pickups: e.pickups,
            deliveries: e.deliveries,
            incorrect_pickups: e.incorrect_pickups,
            incorrect_dropoffs: e.incorrect_dropoffs,
            options_extracted: m.options_extracted,
            states_with_options: m.states_with_options,
            adaptations_generated: m.adaptations_generated,
            episodes: m.episode_decisions.len() as u64,
            episode_decisions: join(&m.episode_decisions),
            episode_lengths: join(&m.episode_lengths),
        }
    }
}

impl TryFrom<Row> for Metrics {
    type Error = HarnessError;

    fn try_from(r: Row) -> Result<Self, Self::Error> {
        Ok(Metrics {
            env: r.env.parse().map_err(HarnessError::Config)?,
            seed: r.seed,
            mode: r.mode.parse()?,
            decision_points: r.decision_points,
            executed_actions: r.executed_actions,
            adaptation_actuations: r.adaptation_actuations,
            events: EventCounts {
                crashes: r.crashes,
                lane_violations: r.lane_violations,
                speed_violations: r.speed_violations,
                too_slow: r.too_slow,
                vehicles_encountered: r.vehicles_encountered,
                vehicles_overtaken: r.vehicles_overtaken,
                pickups: r.pickups,
                deliveries: r.deliveries,
                incorrect_pickups: r.incorrect_pickups,
                incorrect_dropoffs: r.incorrect_dropoffs,
            },
            episode_decisions: split(&r.episode_decisions)?,
            episode_lengths: split(&r.episode_lengths)?,
            options_extracted: r.options_extracted,
            states_with_options: r.states_with_options,
            adaptations_generated: r.adaptations_generated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut m = Metrics::from_phase(EnvKind::Warehouse, 3, Mode::Autocop, &PhaseMetrics::default());
        m.decision_points = 10;
        m.executed_actions = 22;
        m.episode_decisions = vec![5, 5];
        m.episode_lengths = vec![11, 11];
        m.events.incorrect_dropoffs = 1;
        let base = Metrics {
            mode: Mode::Baseline,
            episode_decisions: vec![],
            episode_lengths: vec![],
            ..m.clone()
        };
        let text = Metrics::to_csv(&[m.clone(), base.clone()]).unwrap();
        assert!(text.starts_with("env,seed,mode,"));
        assert_eq!(Metrics::from_csv(&text).unwrap(), vec![m.clone(), base]);
        assert_eq!(m.actions_per_decision(), 2.2);
        assert_eq!(m.mean_episode_decisions(), 5.0);
    }
}
