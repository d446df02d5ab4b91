//! Human-readable summaries and the side-by-side comparison.

use std::fmt::Write as _;

use super::config::ExperimentConfig;
use super::metrics::{ratio, Metrics};
use super::pipeline::{BaselineArtifacts, RunArtifacts};
use super::HarnessError;
use crate::engine::Budget;
use crate::env::EnvKind;

fn budget(b: Budget) -> String {
    match b {
        Budget::Steps(n) => format!("{n} steps"),
        Budget::Episodes(n) => format!("{n} episodes"),
    }
}

fn header(out: &mut String, c: &ExperimentConfig, mode: &str) {
    let _ = writeln!(out, "mode: {mode}");
    let _ = writeln!(out, "environment: {}", c.env);
    let _ = writeln!(out, "seed: {}", c.seed);
    let _ = writeln!(out, "primitive learning: {}", budget(c.primitive_budget()));
}

fn exploitation(out: &mut String, m: &Metrics) {
    let _ = writeln!(out, "exploitation:");
    let _ = writeln!(out, "  decision points: {}", m.decision_points);
    let _ = writeln!(out, "  executed actions: {}", m.executed_actions);
    let _ = writeln!(out, "  adaptation actuations: {}", m.adaptation_actuations);
    let e = &m.events;
    match m.env {
        EnvKind::Driving => {
            let _ = writeln!(out, "  crashes: {}", e.crashes);
            let _ = writeln!(out, "  lane violations: {}", e.lane_violations);
            let _ = writeln!(out, "  speed violations: {}", e.speed_violations);
            let _ = writeln!(out, "  vehicles encountered: {}", e.vehicles_encountered);
        }
        EnvKind::Warehouse => {
            let _ = writeln!(out, "  episodes: {}", m.episode_decisions.len());
            if let (Some(d), Some(a)) = (m.episode_decisions.first(), m.episode_lengths.first()) {
                let _ = writeln!(out, "  first episode: {d} decision points, {a} actions");
            }
            let _ = writeln!(out, "  mean decision points per episode: {:.3}", m.mean_episode_decisions());
            let _ = writeln!(out, "  deliveries: {}", e.deliveries);
            let _ = writeln!(out, "  incorrect pickups: {}", e.incorrect_pickups);
            let _ = writeln!(out, "  incorrect dropoffs: {}", e.incorrect_dropoffs);
        }
    }
}

pub fn run_summary(c: &ExperimentConfig, run: &RunArtifacts) -> String {
    let set = c.env.actions();
    let mut out = String::new();
    header(&mut out, c, "autocop");
    let _ = writeln!(out, "option learning: {}", budget(c.option_budget()));
    let _ = writeln!(out, "trace records: {}", run.primitive.trace.len());
    let _ = writeln!(out, "options extracted: {}", run.metrics.options_extracted);
    let _ = writeln!(out, "states with learnable options: {}", run.metrics.states_with_options);
    let _ = writeln!(out, "adaptations generated: {}", run.adaptations.len());
    for a in &run.adaptations {
        let _ = writeln!(
            out,
            "  {} {} -> {} (q = {:.4})",
            a.context,
            a.source_state,
            set.format_seq(&a.actions),
            a.q_value
        );
    }
    exploitation(&mut out, &run.metrics);
    out
}

pub fn baseline_summary(c: &ExperimentConfig, run: &BaselineArtifacts) -> String {
    let mut out = String::new();
    header(&mut out, c, "baseline");
    let _ = writeln!(out, "trace records: {}", run.primitive.trace.len());
    exploitation(&mut out, &run.metrics);
    out
}

fn ratio_text(base: f64, auto: f64) -> String {
    if base == auto {
        "1.000".to_string()
    } else if base == 0.0 {
        "inf".to_string()
    } else {
        format!("{:.3}", auto / base)
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

/// Counters and derived ratios for two runs, as CSV followed by an aligned table.
pub fn compare_report(baseline: &Metrics, autocop: &Metrics) -> Result<String, HarnessError> {
    if baseline.env != autocop.env {
        return Err(HarnessError::Config(format!(
            "cannot compare a {} run with a {} run",
            baseline.env, autocop.env
        )));
    }
    type Getter = fn(&Metrics) -> f64;
    let mut rows: Vec<(&str, Getter)> = vec![
        ("decision_points", |m| m.decision_points as f64),
        ("executed_actions", |m| m.executed_actions as f64),
        ("adaptation_actuations", |m| m.adaptation_actuations as f64),
        ("actions_per_decision", |m| m.actions_per_decision()),
    ];
    match baseline.env {
        EnvKind::Driving => rows.extend::<[(&str, Getter); 9]>([
            ("crashes", |m| m.events.crashes as f64),
            ("lane_violations", |m| m.events.lane_violations as f64),
            ("speed_violations", |m| m.events.speed_violations as f64),
            ("vehicles_encountered", |m| m.events.vehicles_encountered as f64),
            ("crashes_per_vehicle", |m| m.per_vehicle(m.events.crashes)),
            ("lane_violations_per_vehicle", |m| m.per_vehicle(m.events.lane_violations)),
            ("speed_violations_per_vehicle", |m| m.per_vehicle(m.events.speed_violations)),
            ("violations_per_vehicle", |m| m.per_vehicle(m.violations())),
            ("adaptations_per_decision", |m| ratio(m.adaptation_actuations, m.decision_points)),
        ]),
        EnvKind::Warehouse => rows.extend::<[(&str, Getter); 7]>([
            ("episodes", |m| m.episode_decisions.len() as f64),
            ("first_episode_decisions", |m| m.episode_decisions.first().copied().unwrap_or(0) as f64),
            ("first_episode_actions", |m| m.episode_lengths.first().copied().unwrap_or(0) as f64),
            ("mean_episode_decisions", |m| m.mean_episode_decisions()),
            ("mean_episode_actions", |m| m.mean_episode_length()),
            ("deliveries", |m| m.events.deliveries as f64),
            ("incorrect_dropoffs", |m| m.events.incorrect_dropoffs as f64),
        ]),
    }
    rows.extend::<[(&str, Getter); 3]>([
        ("options_extracted", |m| m.options_extracted as f64),
        ("states_with_options", |m| m.states_with_options as f64),
        ("adaptations_generated", |m| m.adaptations_generated as f64),
    ]);

    let table: Vec<[String; 4]> = rows
        .iter()
        .map(|(name, get)| {
            let (b, a) = (get(baseline), get(autocop));
            [name.to_string(), fmt_num(b), fmt_num(a), ratio_text(b, a)]
        })
        .collect();

    let mut out = String::from("metric,baseline,autocop,ratio\n");
    for r in &table {
        let _ = writeln!(out, "{}", r.join(","));
    }
    out.push('\n');
    let widths: Vec<usize> = (0..4)
        .map(|i| table.iter().map(|r| r[i].len()).chain([["metric", "baseline", "autocop", "ratio"][i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: [&str; 4]| {
        format!(
            "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}\n",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        )
    };
    out.push_str(&line(["metric", "baseline", "autocop", "ratio"]));
    for r in &table {
        out.push_str(&line([&r[0], &r[1], &r[2], &r[3]]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PhaseMetrics;
    use crate::harness::metrics::Mode;

    fn metrics(env: EnvKind) -> Metrics {
        let mut m = Metrics::from_phase(env, 1, Mode::Baseline, &PhaseMetrics::default());
        m.decision_points = 8000;
        m.executed_actions = 8000;
        m.events.vehicles_encountered = 100;
        m.events.lane_violations = 40;
        m
    }

    #[test]
    fn identical_inputs_give_unit_ratios() {
        let m = metrics(EnvKind::Driving);
        let text = compare_report(&m, &m).unwrap();
        let csv: Vec<&str> = text.lines().skip(1).take_while(|l| !l.is_empty()).collect();
        assert!(!csv.is_empty());
        assert!(csv.iter().all(|l| l.ends_with(",1.000")), "{text}");
    }

    #[test]
    fn ratios_and_mismatch() {
        let b = metrics(EnvKind::Driving);
        let mut a = b.clone();
        a.executed_actions = 15516;
        let text = compare_report(&b, &a).unwrap();
        assert!(text.contains("actions_per_decision,1,1.9395,1.940"), "{text}");
        assert!(compare_report(&b, &metrics(EnvKind::Warehouse)).is_err());
    }

    #[test]
    fn warehouse_rows() {
        let mut b = metrics(EnvKind::Warehouse);
        b.episode_decisions = vec![11];
        b.episode_lengths = vec![11];
        let mut a = b.clone();
        a.episode_decisions = vec![5];
        let text = compare_report(&b, &a).unwrap();
        assert!(text.contains("first_episode_decisions,11,5,0.455"), "{text}");
    }
}
