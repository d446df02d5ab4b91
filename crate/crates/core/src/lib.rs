//! Learns reusable action sequences (options) from execution traces and
//! turns the best of them into context-oriented adaptations.
//!
//! The pipeline runs in five phases: primitive Q-learning with trace capture,
//! option extraction, option-level Q-learning, adaptation selection with stub
//! generation, and an exploitation phase with the adaptations installed. Two
//! simulated environments are included: a two-lane highway and a warehouse
//! delivery grid.

pub mod cop;
pub mod engine;
pub mod env;
pub mod harness;
pub mod options;
pub mod rl;
pub mod space;
pub mod trace;

pub use space::{ActionId, ActionSeq, ActionSet, Component, StateKey};
