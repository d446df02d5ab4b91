//! Candidate options mined from trace batches.
//!
//! Every record starts a growing action sequence; each prefix is registered as
//! a candidate for the record's state. Growth stops at the length cap, at a
//! goal-reaching step (which is still registered), at an episode boundary, or
//! where the available records end.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::space::{ActionSeq, ActionSet, StateKey};
use crate::trace::{Batch, TraceRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OptionsError {
    #[error("batch is not consecutive: step {prev} followed by {next}")]
    Sequence { prev: u64, next: u64 },
    #[error("maximum option length must be positive")]
    ZeroLength,
}

/// Goal structure of an environment, as seen by extraction.
pub trait GoalTest {
    /// States where no adaptation is needed; never used as initiation states.
    fn is_goal_state(&self, state: &StateKey) -> bool;

    /// Whether the logged step achieved a goal. Defaults to landing in a goal state.
    fn reaches_goal(&self, record: &TraceRecord) -> bool {
        self.is_goal_state(&record.next_state)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptionCandidate {
    pub initiation_state: StateKey,
    pub actions: ActionSeq,
    /// Sum of logged rewards along the most recent occurrence.
    pub cumulative_reward: f64,
    pub execution_count: u64,
    /// Occurrences whose last step reached a goal.
    pub goal_count: u64,
}

impl OptionCandidate {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptionStore {
    by_state: HashMap<StateKey, BTreeMap<ActionSeq, OptionCandidate>>,
}

impl OptionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds one batch into the store.
    pub fn extract_batch(
        &mut self,
        batch: &Batch<'_>,
        max_option_length: usize,
        goals: &(impl GoalTest + ?Sized),
    ) -> Result<(), OptionsError> {
        if max_option_length == 0 {
            return Err(OptionsError::ZeroLength);
        }
        let records = batch.records();
        if let Some(w) = records.windows(2).find(|w| w[1].step != w[0].step + 1) {
            return Err(OptionsError::Sequence {
                prev: w[0].step,
                next: w[1].step,
            });
        }
        for (i, head) in batch.primary().iter().enumerate() {
            if goals.is_goal_state(&head.state) {
                continue;
            }
            let mut seq = Vec::with_capacity(max_option_length);
            let mut cum = 0.0;
            for rec in records[i..].iter().take(max_option_length) {
                if rec.episode != head.episode {
                    break;
                }
                seq.push(rec.action);
                cum += rec.reward;
                let reached = goals.reaches_goal(rec);
                self.register(&head.state, &seq, cum, reached);
                if reached {
                    break;
                }
            }
        }
        Ok(())
    }

    fn register(&mut self, state: &StateKey, seq: &[crate::space::ActionId], reward: f64, reached: bool) {
        let row = match self.by_state.get_mut(state) {
            Some(row) => row,
            None => self.by_state.entry(state.clone()).or_default(),
        };
        let key = ActionSeq(seq.to_vec());
        let c = row.entry(key.clone()).or_insert_with(|| OptionCandidate {
            initiation_state: state.clone(),
            actions: key,
            cumulative_reward: 0.0,
            execution_count: 0,
            goal_count: 0,
        });
        c.cumulative_reward = reward;
        c.execution_count += 1;
        c.goal_count += u64::from(reached);
    }

    /// Candidates for `s`, ordered by action ids. Empty for unseen states.
    pub fn candidates_for(&self, s: &StateKey) -> impl Iterator<Item = &OptionCandidate> {
        self.by_state.get(s).into_iter().flat_map(BTreeMap::values)
    }

    pub fn get(&self, s: &StateKey, seq: &ActionSeq) -> Option<&OptionCandidate> {
        self.by_state.get(s).and_then(|r| r.get(seq))
    }

    /// States with at least one candidate, sorted.
    pub fn states(&self) -> Vec<&StateKey> {
        let mut v: Vec<_> = self.by_state.keys().collect();
        v.sort();
        v
    }

    /// Total number of candidates.
    pub fn len(&self) -> usize {
        self.by_state.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_state.is_empty()
    }

    /// Dump with a `state: [s]` header per state and one line per candidate,
    /// shortest sequences first.
    pub fn dump(&self, set: &ActionSet) -> String {
        let mut out = String::new();
        for s in self.states() {
            let _ = writeln!(out, "state: {s}");
            let mut cands: Vec<_> = self.candidates_for(s).collect();
            cands.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.actions.cmp(&b.actions)));
            for c in cands {
                let names: Vec<String> = c.actions.iter().map(|a| format!("\"{}\"", set.name(*a))).collect();
                let _ = writeln!(
                    out,
                    "reward:{} count:{} -> actions: [{}]",
                    c.cumulative_reward,
                    c.execution_count,
                    names.join(",")
                );
            }
        }
        out
    }
}

/// Runs extraction over a whole trace in batches, with the lookahead needed
/// for options spanning a batch boundary.
pub fn extract_trace(
    trace: &crate::trace::Trace,
    batch_size: usize,
    max_option_length: usize,
    goals: &(impl GoalTest + ?Sized),
) -> Result<OptionStore, OptionsError> {
    let mut store = OptionStore::new();
    for batch in trace.batches(batch_size, max_option_length.saturating_sub(1)) {
        store.extract_batch(&batch, max_option_length, goals)?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{int_state, ActionId};
    use crate::trace::Trace;

    struct NoGoal;
    impl GoalTest for NoGoal {
        fn is_goal_state(&self, _: &StateKey) -> bool {
            false
        }
    }

    fn trace(steps: &[(i64, u8, f64)]) -> Trace {
        let mut t = Trace::new();
        for (i, (s, a, r)) in steps.iter().enumerate() {
            let next = steps.get(i + 1).map_or(99, |n| n.0);
            t.append(TraceRecord {
                step: i as u64,
                episode: None,
                state: int_state(&[*s]),
                action: ActionId(*a),
                next_state: int_state(&[next]),
                reward: *r,
            })
            .unwrap();
        }
        t
    }

    fn seq(ids: &[u8]) -> ActionSeq {
        ActionSeq(ids.iter().map(|i| ActionId(*i)).collect())
    }

    #[test]
    fn single_record() {
        let t = trace(&[(1, 3, 1.0)]);
        let store = extract_trace(&t, 500, 8, &NoGoal).unwrap();
        assert_eq!(store.len(), 1);
        let c = store.get(&int_state(&[1]), &seq(&[3])).unwrap();
        assert_eq!((c.cumulative_reward, c.execution_count), (1.0, 1));
    }

    #[test]
    fn repeated_sequences_count_twice() {
        let t = trace(&[(1, 0, 1.0), (2, 1, 1.0), (1, 0, 1.0), (2, 1, 1.0)]);
        let store = extract_trace(&t, 2, 2, &NoGoal).unwrap();
        let s1 = int_state(&[1]);
        assert_eq!(store.get(&s1, &seq(&[0])).unwrap().execution_count, 2);
        assert_eq!(store.get(&s1, &seq(&[0, 1])).unwrap().execution_count, 2);
        assert_eq!(store.candidates_for(&int_state(&[7])).count(), 0);
    }

    #[test]
    fn goal_state_is_not_an_initiation_state_and_stops_growth() {
        struct Two;
        impl GoalTest for Two {
            fn is_goal_state(&self, s: &StateKey) -> bool {
                *s == int_state(&[2])
            }
        }
        let t = trace(&[(1, 0, 0.0), (2, 1, 0.0), (3, 2, 0.0)]);
        let store = extract_trace(&t, 500, 8, &Two).unwrap();
        assert_eq!(store.candidates_for(&int_state(&[2])).count(), 0);
        let s1: Vec<_> = store.candidates_for(&int_state(&[1])).collect();
        assert_eq!(s1.len(), 1);
        assert_eq!(s1[0].goal_count, 1);
    }

    #[test]
    fn non_consecutive_batch_rejected() {
        let t = trace(&[(1, 0, 0.0), (2, 0, 0.0)]);
        let mut recs = t.records().to_vec();
        recs[1].step = 5;
        let mut store = OptionStore::new();
        let err = store.extract_batch(&Batch::new(&recs, 2), 4, &NoGoal).unwrap_err();
        assert_eq!(err, OptionsError::Sequence { prev: 0, next: 5 });
    }

    #[test]
    fn dump_format() {
        static SET: ActionSet = ActionSet::new(&["a", "b"]);
        let t = trace(&[(1, 1, 2.0), (2, 0, -1.0)]);
        let store = extract_trace(&t, 500, 8, &NoGoal).unwrap();
        let text = store.dump(&SET);
        assert_eq!(
            text,
            "state: [1]\nreward:2 count:1 -> actions: [\"b\"]\nreward:1 count:1 -> actions: [\"b\",\"a\"]\n\
             state: [2]\nreward:-1 count:1 -> actions: [\"a\"]\n"
        );
    }
}
