//! Minimal context-oriented programming runtime.
//!
//! Contexts are named after the state they represent. A context can be bound
//! to one behavioral adaptation and, once activated, redirects dispatch for
//! its state to that adaptation. Activation is strictly LIFO.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::space::{ActionId, ActionSeq, ActionSet, StateKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CopError {
    #[error("context name must not be empty")]
    EmptyName,
    #[error("behavioral adaptation must contain at least one action")]
    EmptyAdaptation,
    #[error("adaptation has {len} actions, more than the maximum of {max}")]
    TooLong { len: usize, max: usize },
    #[error("action id {0} is not a primitive of this environment")]
    ForeignAction(u8),
    #[error("context {0} is already bound to a different adaptation")]
    DuplicateBinding(ContextId),
    #[error("unknown context {0}")]
    UnknownContext(ContextId),
    #[error("context {0} is already active")]
    DoubleActivation(ContextId),
    #[error("context {0} is not on top of the activation stack")]
    ActivationOrder(ContextId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextId(String);

impl ContextId {
    pub fn new(name: impl Into<String>) -> Result<Self, CopError> {
        let name = name.into();
        if name.is_empty() {
            return Err(CopError::EmptyName);
        }
        Ok(ContextId(name))
    }

    pub fn for_state(state: &StateKey) -> Self {
        ContextId(state.context_name())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContextId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BehavioralAdaptation {
    actions: ActionSeq,
}

impl BehavioralAdaptation {
    pub fn new(actions: impl Into<ActionSeq>) -> Result<Self, CopError> {
        let actions = actions.into();
        if actions.is_empty() {
            return Err(CopError::EmptyAdaptation);
        }
        Ok(BehavioralAdaptation { actions })
    }

    /// Checks the sequence against an environment's action set and length cap.
    pub fn validate(&self, set: &ActionSet, max_len: usize) -> Result<(), CopError> {
        if self.actions.len() > max_len {
            return Err(CopError::TooLong {
                len: self.actions.len(),
                max: max_len,
            });
        }
        match self.actions.iter().find(|a| !set.contains(**a)) {
            Some(ActionId(id)) => Err(CopError::ForeignAction(*id)),
            None => Ok(()),
        }
    }

    pub fn actions(&self) -> &ActionSeq {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binding {
    pub adaptation: BehavioralAdaptation,
    pub target: String,
}

/// What the running system should do in the sensed state.
#[derive(Debug, PartialEq, Eq)]
pub enum Behavior<'a> {
    /// No active context matches; select a primitive action.
    Base,
    Adaptation(&'a BehavioralAdaptation),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContextRegistry {
    bindings: BTreeMap<ContextId, Binding>,
    active: Vec<ContextId>,
}

impl ContextRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `ctx` to `ba`. Rebinding to the same sequence is a no-op.
    pub fn adapt(
        &mut self,
        ctx: ContextId,
        ba: BehavioralAdaptation,
        target: impl Into<String>,
    ) -> Result<(), CopError> {
        if let Some(existing) = self.bindings.get(&ctx) {
            if existing.adaptation == ba {
                return Ok(());
            }
            return Err(CopError::DuplicateBinding(ctx));
        }
        self.bindings.insert(
            ctx,
            Binding {
                adaptation: ba,
                target: target.into(),
            },
        );
        Ok(())
    }

    /// Removes an inactive binding. Returns whether one existed.
    pub fn withdraw(&mut self, ctx: &ContextId) -> Result<bool, CopError> {
        if self.active.contains(ctx) {
            return Err(CopError::ActivationOrder(ctx.clone()));
        }
        Ok(self.bindings.remove(ctx).is_some())
    }

    pub fn activate(&mut self, ctx: &ContextId) -> Result<(), CopError> {
        if !self.bindings.contains_key(ctx) {
            return Err(CopError::UnknownContext(ctx.clone()));
        }
        if self.active.contains(ctx) {
            return Err(CopError::DoubleActivation(ctx.clone()));
        }
        self.active.push(ctx.clone());
        Ok(())
    }

    pub fn deactivate(&mut self, ctx: &ContextId) -> Result<(), CopError> {
        if self.active.last() != Some(ctx) {
            return Err(CopError::ActivationOrder(ctx.clone()));
        }
        self.active.pop();
        Ok(())
    }

    pub fn dispatch(&self, state: &StateKey) -> Behavior<'_> {
        let name = state.context_name();
        self.active
            .iter()
            .rev()
            .find(|c| c.as_str() == name)
            .and_then(|c| self.bindings.get(c))
            .map_or(Behavior::Base, |b| Behavior::Adaptation(&b.adaptation))
    }

    /// The bound context for a sensed state, if any.
    pub fn sensed(&self, state: &StateKey) -> Option<&ContextId> {
        let ctx = ContextId::for_state(state);
        self.bindings.get_key_value(&ctx).map(|(k, _)| k)
    }

    pub fn binding(&self, ctx: &ContextId) -> Option<&Binding> {
        self.bindings.get(ctx)
    }

    pub fn bindings(&self) -> impl Iterator<Item = (&ContextId, &Binding)> {
        self.bindings.iter()
    }

    pub fn active_stack(&self) -> &[ContextId] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}
