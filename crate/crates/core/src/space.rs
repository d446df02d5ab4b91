//! Discrete states and primitive actions shared by every module.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("empty state")]
    EmptyState,
    #[error("invalid state component `{0}`")]
    BadComponent(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
}

/// One component of a discrete state vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Int(i64),
    Bool(bool),
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Int(v) => write!(f, "{v}"),
            Component::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for Component {
    type Err = SpaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "true" => Ok(Component::Bool(true)),
            "false" => Ok(Component::Bool(false)),
            _ => s
                .parse::<i64>()
                .map(Component::Int)
                .map_err(|_| SpaceError::BadComponent(s.to_string())),
        }
    }
}

/// Environment-agnostic state key, e.g. `[60,0,1]` or `[2,3,false]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(Vec<Component>);

impl StateKey {
    pub fn new(components: Vec<Component>) -> Self {
        StateKey(components)
    }

    pub fn components(&self) -> &[Component] {
        &self.0
    }

    /// Comma-joined form used in trace files: `60,0,1`.
    pub fn canonical(&self) -> String {
        self.join(",")
    }

    /// Name of the context generated for this state: `Context6001`.
    pub fn context_name(&self) -> String {
        format!("Context{}", self.join(""))
    }

    fn join(&self, sep: &str) -> String {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        parts.join(sep)
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.canonical())
    }
}

impl FromStr for StateKey {
    type Err = SpaceError;

    /// Parses the canonical form, with or without surrounding brackets.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let s = s
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .unwrap_or(s);
        if s.is_empty() {
            return Err(SpaceError::EmptyState);
        }
        s.split(',')
            .map(|p| p.trim().parse())
            .collect::<Result<Vec<_>, _>>()
            .map(StateKey)
    }
}

/// Index of a primitive action within an [`ActionSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u8);

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The primitive actions of one environment, by name.
#[derive(Debug, PartialEq, Eq)]
pub struct ActionSet {
    names: &'static [&'static str],
}

impl ActionSet {
    pub const fn new(names: &'static [&'static str]) -> Self {
        ActionSet { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, id: ActionId) -> bool {
        id.index() < self.names.len()
    }

    pub fn name(&self, id: ActionId) -> &'static str {
        self.names[id.index()]
    }

    pub fn id(&self, name: &str) -> Result<ActionId, SpaceError> {
        self.names
            .iter()
            .position(|n| *n == name)
            .map(|i| ActionId(i as u8))
            .ok_or_else(|| SpaceError::UnknownAction(name.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = ActionId> + '_ {
        (0..self.names.len()).map(|i| ActionId(i as u8))
    }

    pub fn names(&self) -> &'static [&'static str] {
        self.names
    }

    /// Renders a sequence as `[a,b,c]`.
    pub fn format_seq(&self, seq: &[ActionId]) -> String {
        let names: Vec<&str> = seq.iter().map(|a| self.name(*a)).collect();
        format!("[{}]", names.join(","))
    }

    /// Inverse of [`ActionSet::format_seq`].
    pub fn parse_seq(&self, s: &str) -> Result<ActionSeq, SpaceError> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| SpaceError::UnknownAction(s.to_string()))?;
        if inner.is_empty() {
            return Ok(ActionSeq::default());
        }
        inner
            .split(',')
            .map(|n| self.id(n.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map(ActionSeq)
    }
}

/// An ordered sequence of primitive actions. Orders lexicographically by id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionSeq(pub Vec<ActionId>);

impl Deref for ActionSeq {
    type Target = [ActionId];

    fn deref(&self) -> &[ActionId] {
        &self.0
    }
}

impl From<Vec<ActionId>> for ActionSeq {
    fn from(v: Vec<ActionId>) -> Self {
        ActionSeq(v)
    }
}

/// Builds a state key from integers, mostly for tests and examples.
pub fn int_state(values: &[i64]) -> StateKey {
    StateKey(values.iter().map(|v| Component::Int(*v)).collect())
}
