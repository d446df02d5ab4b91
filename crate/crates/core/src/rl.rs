//! Tabular Q-learning over primitives and options.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::space::{ActionId, ActionSeq, ActionSet, SpaceError, StateKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("reward {0} is not finite")]
    InvalidReward(f64),
    #[error("no actions available")]
    NoActions,
    #[error("invalid learning parameters: {0}")]
    InvalidParams(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A primitive action or an option, in one action space.
///
/// The derived order puts every primitive before every option, then orders by
/// id; argmax ties resolve to the smallest key.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKey {
    Primitive(ActionId),
    Option(ActionSeq),
}

impl ActionKey {
    pub fn render(&self, set: &ActionSet) -> String {
        match self {
            ActionKey::Primitive(a) => set.name(*a).to_string(),
            ActionKey::Option(seq) => set.format_seq(seq),
        }
    }

    pub fn parse(s: &str, set: &ActionSet) -> Result<Self, SpaceError> {
        if s.starts_with('[') {
            set.parse_seq(s).map(ActionKey::Option)
        } else {
            set.id(s).map(ActionKey::Primitive)
        }
    }

    pub fn is_option(&self) -> bool {
        matches!(self, ActionKey::Option(_))
    }
}

/// How the bootstrap term is discounted after a k-step option.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OptionDiscount {
    /// `γ^k`, the semi-Markov convention.
    #[default]
    PerStep,
    /// `γ` regardless of option length.
    Flat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearningParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_explore: f64,
    pub epsilon_exploit: f64,
    /// Budget index at which ε drops from the explore to the exploit value.
    pub exploration_steps: u64,
    pub option_discount: OptionDiscount,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            alpha: 0.1,
            gamma: 0.6,
            epsilon_explore: 0.2,
            epsilon_exploit: 0.001,
            exploration_steps: 0,
            option_discount: OptionDiscount::PerStep,
        }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::InvalidParams(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon_explore) || !(0.0..=1.0).contains(&self.epsilon_exploit) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.epsilon_exploit > self.epsilon_explore {
            return bad("exploit epsilon exceeds explore epsilon");
        }
        Ok(())
    }

    /// Two-phase schedule: explore value before `exploration_steps`, exploit value after.
    pub fn epsilon_at(&self, t: u64) -> f64 {
        if t < self.exploration_steps {
            self.epsilon_explore
        } else {
            self.epsilon_exploit
        }
    }

    pub fn bootstrap_discount(&self, k: u32) -> f64 {
        match self.option_discount {
            OptionDiscount::PerStep => self.gamma.powi(k as i32),
            OptionDiscount::Flat => self.gamma,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Entry {
    value: f64,
    visits: u64,
}

/// Q values keyed by state then action. Unseen pairs read as zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QTable {
    rows: HashMap<StateKey, BTreeMap<ActionKey, Entry>>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: &StateKey, a: &ActionKey) -> f64 {
        self.entry(s, a).map_or(0.0, |e| e.value)
    }

    /// Number of updates applied to `(s, a)`.
    pub fn visits(&self, s: &StateKey, a: &ActionKey) -> u64 {
        self.entry(s, a).map_or(0, |e| e.visits)
    }

    fn entry(&self, s: &StateKey, a: &ActionKey) -> Option<&Entry> {
        self.rows.get(s).and_then(|r| r.get(a))
    }

    /// Overwrites a value without counting a visit.
    pub fn set(&mut self, s: StateKey, a: ActionKey, value: f64) {
        self.rows.entry(s).or_default().entry(a).or_default().value = value;
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries in state order, then action order.
    pub fn entries(&self) -> Vec<(&StateKey, &ActionKey, f64)> {
        let mut states: Vec<_> = self.rows.keys().collect();
        states.sort();
        states
            .into_iter()
            .flat_map(|s| self.rows[s].iter().map(move |(a, e)| (s, a, e.value)))
            .collect()
    }

    /// Largest value over `available` at `s`; zero if `available` is empty.
    pub fn max_over(&self, s: &StateKey, available: &[ActionKey]) -> f64 {
        available
            .iter()
            .map(|a| self.get(s, a))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            .unwrap_or(0.0)
    }

    /// `state<TAB>action<TAB>value` lines.
    pub fn to_text(&self, set: &ActionSet) -> String {
        let mut out = String::new();
        for (s, a, v) in self.entries() {
            let _ = writeln!(out, "{}\t{}\t{}", s.canonical(), a.render(set), v);
        }
        out
    }

    pub fn from_text(text: &str, set: &ActionSet) -> Result<Self, RlError> {
        let mut q = QTable::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let err = |msg: String| RlError::Parse { line: i + 1, msg };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 columns, found {}", cols.len())));
            }
            let s: StateKey = cols[0].parse().map_err(|e: SpaceError| err(e.to_string()))?;
            let a = ActionKey::parse(cols[1], set).map_err(|e| err(e.to_string()))?;
            let v: f64 = cols[2].parse().map_err(|_| err(format!("bad value `{}`", cols[2])))?;
            q.set(s, a, v);
        }
        Ok(q)
    }
}

/// Applies one (semi-Markov) Q-learning update and returns the new value.
///
/// `available_next` is the action set at `s_next`; pass an empty slice for a
/// terminal transition so the bootstrap term vanishes.
#[allow(clippy::too_many_arguments)]
pub fn update_q(
    q: &mut QTable,
    s: &StateKey,
    a: &ActionKey,
    reward: f64,
    s_next: &StateKey,
    k: u32,
    available_next: &[ActionKey],
    params: &LearningParams,
) -> Result<f64, RlError> {
    if !reward.is_finite() {
        return Err(RlError::InvalidReward(reward));
    }
    let target = reward + params.bootstrap_discount(k) * q.max_over(s_next, available_next);
    let entry = q.rows.entry(s.clone()).or_default().entry(a.clone()).or_default();
    entry.value += params.alpha * (target - entry.value);
    entry.visits += 1;
    Ok(entry.value)
}

/// Greedy action; ties go to the smallest key.
pub fn argmax_q<'a>(q: &QTable, s: &StateKey, available: &'a [ActionKey]) -> Result<&'a ActionKey, RlError> {
    let mut best: Option<(&ActionKey, f64)> = None;
    for a in available {
        let v = q.get(s, a);
        best = match best {
            Some((b, bv)) if bv > v || (bv == v && b <= a) => Some((b, bv)),
            _ => Some((a, v)),
        };
    }
    best.map(|(a, _)| a).ok_or(RlError::NoActions)
}

pub fn select_epsilon_greedy<'a, R: Rng + ?Sized>(
    q: &QTable,
    s: &StateKey,
    available: &'a [ActionKey],
    epsilon: f64,
    rng: &mut R,
) -> Result<&'a ActionKey, RlError> {
    if available.is_empty() {
        return Err(RlError::NoActions);
    }
    if rng.random::<f64>() < epsilon {
        return Ok(&available[rng.random_range(0..available.len())]);
    }
    argmax_q(q, s, available)
}
