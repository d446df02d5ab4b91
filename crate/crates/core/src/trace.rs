//! Append-only log of primitive steps, read back in batches.

use std::fmt::Write as _;

use thiserror::Error;

use crate::space::{ActionId, ActionSet, StateKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("out-of-order record: expected step {expected}, got {got}")]
    Sequence { expected: u64, got: u64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    /// Episode index, for episodic environments only.
    pub episode: Option<u64>,
    pub state: StateKey,
    pub action: ActionId,
    pub next_state: StateKey,
    pub reward: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraceCursor {
    pub last_batch_end: usize,
}

/// A batch of records: the primary range followed by read-only lookahead.
#[derive(Clone, Copy, Debug)]
pub struct Batch<'a> {
    records: &'a [TraceRecord],
    primary: usize,
}

impl<'a> Batch<'a> {
    pub fn new(records: &'a [TraceRecord], primary: usize) -> Self {
        assert!(primary <= records.len());
        Batch { records, primary }
    }

    /// Primary records then lookahead, contiguous.
    pub fn records(&self) -> &'a [TraceRecord] {
        self.records
    }

    pub fn primary(&self) -> &'a [TraceRecord] {
        &self.records[..self.primary]
    }

    pub fn lookahead(&self) -> &'a [TraceRecord] {
        &self.records[self.primary..]
    }

    pub fn is_empty(&self) -> bool {
        self.primary == 0
    }
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, record: TraceRecord) -> Result<(), TraceError> {
        let expected = self.records.len() as u64;
        if record.step != expected {
            return Err(TraceError::Sequence {
                expected,
                got: record.step,
            });
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Returns up to `batch_size` records from the cursor plus up to
    /// `lookahead` records past the batch end, and the advanced cursor.
    pub fn read_batch(
        &self,
        cursor: TraceCursor,
        batch_size: usize,
        lookahead: usize,
    ) -> (Batch<'_>, TraceCursor) {
        let start = cursor.last_batch_end.min(self.records.len());
        let end = start.saturating_add(batch_size.max(1)).min(self.records.len());
        let tail = end.saturating_add(lookahead).min(self.records.len());
        (
            Batch::new(&self.records[start..tail], end - start),
            TraceCursor { last_batch_end: end },
        )
    }

    /// Iterates over all batches of the trace.
    pub fn batches(&self, batch_size: usize, lookahead: usize) -> impl Iterator<Item = Batch<'_>> {
        let mut cursor = TraceCursor::default();
        std::iter::from_fn(move || {
            let (batch, next) = self.read_batch(cursor, batch_size, lookahead);
            cursor = next;
            (!batch.is_empty()).then_some(batch)
        })
    }

    /// `step<TAB>episode<TAB>state<TAB>action<TAB>nextState<TAB>reward` lines;
    /// the episode column is `-` for continuing environments.
    pub fn to_tsv(&self, set: &ActionSet) -> String {
        let mut out = String::new();
        for r in &self.records {
            let episode = r.episode.map_or_else(|| "-".to_string(), |e| e.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.step,
                episode,
                r.state.canonical(),
                set.name(r.action),
                r.next_state.canonical(),
                r.reward
            );
        }
        out
    }

    pub fn from_tsv(text: &str, set: &ActionSet) -> Result<Self, TraceError> {
        let mut trace = Trace::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let err = |msg: String| TraceError::Parse { line: i + 1, msg };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 6 {
                return Err(err(format!("expected 6 columns, found {}", cols.len())));
            }
            let step = cols[0].parse().map_err(|_| err(format!("bad step `{}`", cols[0])))?;
            let episode = match cols[1] {
                "-" => None,
                e => Some(e.parse().map_err(|_| err(format!("bad episode `{e}`")))?),
            };
            let state = cols[2].parse().map_err(|e: crate::space::SpaceError| err(e.to_string()))?;
            let action = set.id(cols[3]).map_err(|e| err(e.to_string()))?;
            let next_state = cols[4].parse().map_err(|e: crate::space::SpaceError| err(e.to_string()))?;
            let reward = cols[5].parse().map_err(|_| err(format!("bad reward `{}`", cols[5])))?;
            trace.append(TraceRecord {
                step,
                episode,
                state,
                action,
                next_state,
                reward,
            })?;
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::int_state;

    fn rec(step: u64) -> TraceRecord {
        TraceRecord {
            step,
            episode: None,
            state: int_state(&[step as i64]),
            action: ActionId(0),
            next_state: int_state(&[step as i64 + 1]),
            reward: -1.5,
        }
    }

    fn trace_of(n: u64) -> Trace {
        let mut t = Trace::new();
        for i in 0..n {
            t.append(rec(i)).unwrap();
        }
        t
    }

    #[test]
    fn append_checks_sequence() {
        let mut t = Trace::new();
        t.append(rec(0)).unwrap();
        assert_eq!(t.len(), 1);
        let mut t = trace_of(3);
        assert_eq!(t.append(rec(5)), Err(TraceError::Sequence { expected: 3, got: 5 }));
    }

    #[test]
    fn batches_and_tail() {
        let empty = Trace::new();
        let (b, c) = empty.read_batch(TraceCursor::default(), 4, 7);
        assert!(b.is_empty());
        assert_eq!(c, TraceCursor::default());

        let t = trace_of(10);
        let (b, c) = t.read_batch(TraceCursor::default(), 4, 0);
        assert_eq!(b.primary().iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(c.last_batch_end, 4);
        let (b, c) = t.read_batch(TraceCursor { last_batch_end: 8 }, 4, 7);
        assert_eq!(b.primary().len(), 2);
        assert!(b.lookahead().is_empty());
        assert_eq!(c.last_batch_end, 10);
    }

    #[test]
    fn lookahead_is_capped() {
        let t = trace_of(10);
        let (b, _) = t.read_batch(TraceCursor::default(), 3, 2);
        assert_eq!(b.primary().len(), 3);
        assert_eq!(b.lookahead().iter().map(|r| r.step).collect::<Vec<_>>(), vec![3, 4]);
    }

    #[test]
    fn eight_thousand_appends_round_trip() {
        static SET: ActionSet = ActionSet::new(&["go"]);
        let t = trace_of(8000);
        assert_eq!(t.len(), 8000);
        let back = Trace::from_tsv(&t.to_tsv(&SET), &SET).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn episode_column() {
        static SET: ActionSet = ActionSet::new(&["go"]);
        let mut t = Trace::new();
        t.append(TraceRecord { episode: Some(3), ..rec(0) }).unwrap();
        let text = t.to_tsv(&SET);
        assert_eq!(text, "0\t3\t0\tgo\t1\t-1.5\n");
        assert_eq!(Trace::from_tsv(&text, &SET).unwrap(), t);
        assert!(Trace::from_tsv("0\t-\t0\tfly\t1\t0\n", &SET).is_err());
    }
}
