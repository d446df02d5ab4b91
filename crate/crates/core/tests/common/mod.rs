//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use autocop::options::{GoalTest, OptionStore};
use autocop::space::{int_state, ActionId, ActionSeq, StateKey};
use autocop::trace::{Trace, TraceRecord};
use rand::Rng;

/// Goal is a single state id; `None` means no goal at all.
pub struct GoalId(pub Option<i64>);

impl GoalTest for GoalId {
    fn is_goal_state(&self, s: &StateKey) -> bool {
        self.0.is_some_and(|g| *s == int_state(&[g]))
    }
}

/// Random trace over `states` single-component states and `actions` actions.
/// Episode ids increase at random when `episodic`.
pub fn random_trace<R: Rng>(rng: &mut R, len: usize, states: i64, actions: u8, episodic: bool) -> Trace {
    let mut t = Trace::new();
    let mut s = rng.random_range(0..states);
    let mut episode = 0u64;
    for i in 0..len {
        let next = rng.random_range(0..states);
        t.append(TraceRecord {
            step: i as u64,
            episode: episodic.then_some(episode),
            state: int_state(&[s]),
            action: ActionId(rng.random_range(0..actions)),
            next_state: int_state(&[next]),
            reward: rng.random_range(-8..=8) as f64,
        })
        .unwrap();
        if episodic && rng.random_bool(0.1) {
            episode += 1;
            s = rng.random_range(0..states);
        } else {
            s = next;
        }
    }
    t
}

/// (count, latest cumulative reward, goal count) per (state, sequence).
pub type OracleStore = HashMap<(StateKey, Vec<ActionId>), (u64, f64, u64)>;

/// Quadratic scan: for every start `i` and length `len`, decide directly
/// whether the window `i..i+len` is a legal option occurrence.
pub fn extraction_oracle(records: &[TraceRecord], max_len: usize, goals: &dyn GoalTest) -> OracleStore {
    let mut out = OracleStore::new();
    for i in 0..records.len() {
        if goals.is_goal_state(&records[i].state) {
            continue;
        }
        for len in 1..=max_len {
            let end = i + len;
            if end > records.len() {
                break;
            }
            let window = &records[i..end];
            let same_episode = window.iter().all(|r| r.episode == records[i].episode);
            let goal_before_last = window[..len - 1].iter().any(|r| goals.reaches_goal(r));
            if !same_episode || goal_before_last {
                continue;
            }
            let seq: Vec<ActionId> = window.iter().map(|r| r.action).collect();
            let sum: f64 = window.iter().map(|r| r.reward).sum();
            let reached = goals.reaches_goal(&window[len - 1]);
            let e = out.entry((records[i].state.clone(), seq)).or_insert((0, 0.0, 0));
            e.0 += 1;
            e.1 = sum;
            e.2 += u64::from(reached);
        }
    }
    out
}

/// Flattens a store into the oracle's shape.
pub fn store_as_oracle(store: &OptionStore) -> OracleStore {
    let mut out = OracleStore::new();
    for s in store.states() {
        for c in store.candidates_for(s) {
            out.insert(
                (s.clone(), c.actions.0.clone()),
                (c.execution_count, c.cumulative_reward, c.goal_count),
            );
        }
    }
    out
}

/// Textbook Q-learning step with a `γ^k` bootstrap.
pub fn q_oracle(q_sa: f64, reward: f64, max_next: f64, alpha: f64, gamma: f64, k: u32) -> f64 {
    let mut discount = 1.0;
    for _ in 0..k {
        discount *= gamma;
    }
    (1.0 - alpha) * q_sa + alpha * (reward + discount * max_next)
}

pub fn seq(ids: &[u8]) -> ActionSeq {
    ActionSeq(ids.iter().map(|i| ActionId(*i)).collect())
}
