//! Character-grid rendering of a warehouse episode.

use std::fmt::Write as _;

use super::HarnessError;
use crate::env::warehouse::{WarehouseConfig, WarehouseState};
use crate::trace::Trace;

/// Distinct cells visited by `episode` (or by the whole trace), in visit order.
pub fn visited_cells(trace: &Trace, episode: Option<u64>) -> Result<Vec<(i64, i64)>, HarnessError> {
    let mut cells: Vec<(i64, i64)> = Vec::new();
    let mut visit = |c: (i64, i64)| {
        if !cells.contains(&c) {
            cells.push(c);
        }
    };
    for r in trace.records().iter().filter(|r| episode.is_none() || r.episode == episode) {
        for key in [&r.state, &r.next_state] {
            let s = WarehouseState::from_key(key)
                .ok_or_else(|| HarnessError::Config(format!("state {key} is not a warehouse state")))?;
            visit(s.pos());
        }
    }
    Ok(cells)
}

/// Grid with `S`, `P` and `D` for start, pickup and dropoff, `*` for visited
/// cells and `.` elsewhere; row 0 is the northern edge.
pub fn render_path(trace: &Trace, config: &WarehouseConfig, episode: Option<u64>) -> Result<String, HarnessError> {
    let cells = visited_cells(trace, episode)?;
    let n = config.n;
    if let Some(c) = cells.iter().find(|(x, y)| !(0..n).contains(x) || !(0..n).contains(y)) {
        return Err(HarnessError::Config(format!("cell {c:?} lies outside the {n}x{n} grid")));
    }
    let actions = trace
        .records()
        .iter()
        .filter(|r| episode.is_none() || r.episode == episode)
        .count();
    let mut out = String::new();
    for x in 0..n {
        let row: Vec<&str> = (0..n)
            .map(|y| match (x, y) {
                p if p == config.start => "S",
                p if p == config.pickup => "P",
                p if p == config.dropoff => "D",
                p if cells.contains(&p) => "*",
                _ => ".",
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    let _ = writeln!(out, "cells visited: {}, actions: {}", cells.len(), actions);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::warehouse::{self, ACTIONS};
    use crate::space::ActionId;
    use crate::trace::TraceRecord;

    fn episode(actions: &[ActionId]) -> Trace {
        let cfg = WarehouseConfig::default();
        let mut s = warehouse::reset(&cfg);
        let mut t = Trace::new();
        for (i, a) in actions.iter().enumerate() {
            let out = warehouse::step(s, *a, &cfg);
            t.append(TraceRecord {
                step: i as u64,
                episode: Some(0),
                state: s.key(),
                action: *a,
                next_state: out.state.key(),
                reward: out.reward,
            })
            .unwrap();
            s = out.state;
        }
        t
    }

    #[test]
    fn empty_episode_shows_markers_only() {
        let text = render_path(&Trace::new(), &WarehouseConfig::default(), None).unwrap();
        assert_eq!(
            text,
            "S . . . .\n. . . . .\n. . . P .\n. . . . .\n. D . . .\ncells visited: 0, actions: 0\n"
        );
    }

    #[test]
    fn optimal_route_covers_ten_cells() {
        use warehouse::*;
        let t = episode(&[EAST, SOUTH, EAST, EAST, SOUTH, PICKUP, SOUTH, WEST, WEST, SOUTH, DROPOFF]);
        let cells = visited_cells(&t, Some(0)).unwrap();
        assert_eq!(cells.len(), 10);
        assert_eq!(cells.first(), Some(&(0, 0)));
        assert_eq!(cells.last(), Some(&(4, 1)));
        assert!(cells.contains(&(2, 3)));
        let text = render_path(&t, &WarehouseConfig::default(), Some(0)).unwrap();
        assert!(text.starts_with("S * . . .\n. * * * .\n. . . P .\n. * * * .\n. D . . .\n"), "{text}");
    }

    #[test]
    fn driving_trace_is_rejected() {
        let t = Trace::from_tsv("0\t-\t60,0,4\tnorth\t60,0,4\t8\n", &ACTIONS).unwrap();
        assert!(matches!(
            render_path(&t, &WarehouseConfig::default(), None),
            Err(HarnessError::Config(_))
        ));
    }
}
