//! The end-to-end experiment: primitive learning with trace capture, option
//! extraction, option learning, adaptation generation and exploitation.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{Metrics, Mode};
use super::{report, HarnessError};
use crate::cop::ContextRegistry;
use crate::engine::{self, Adaptation, LearnSettings, PhaseMetrics, PhaseSettings};
use crate::env::driving::DrivingEnv;
use crate::env::warehouse::WarehouseEnv;
use crate::env::{EnvKind, Environment};
use crate::options::{self, OptionStore};
use crate::rl::QTable;
use crate::trace::Trace;

use super::config::ExperimentConfig;

/// Independent random streams, one per phase and consumer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
enum Stream {
    PrimitiveAgent = 1,
    PrimitiveEnv,
    OptionAgent,
    OptionEnv,
    EvalAgent,
    EvalEnv,
}

fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}

/// Output of the primitive learning phase.
#[derive(Clone, Debug)]
pub struct PrimitivePhase {
    pub q: QTable,
    pub trace: Trace,
}

/// Everything a full run produces.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub primitive: PrimitivePhase,
    pub store: OptionStore,
    pub option_q: QTable,
    pub adaptations: Vec<Adaptation>,
    pub eval: PhaseMetrics,
    pub eval_trace: Trace,
    pub metrics: Metrics,
}

#[derive(Clone, Debug)]
pub struct BaselineArtifacts {
    pub primitive: PrimitivePhase,
    pub eval: PhaseMetrics,
    pub eval_trace: Trace,
    pub metrics: Metrics,
}

pub struct Pipeline {
    config: ExperimentConfig,
}

impl Pipeline {
    pub fn new(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        Ok(Pipeline { config })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn make_env(&self, env_rng: ChaCha8Rng) -> Box<dyn Environment> {
        match self.config.env {
            EnvKind::Driving => Box::new(DrivingEnv::new(self.config.driving.clone(), env_rng)),
            EnvKind::Warehouse => Box::new(WarehouseEnv::new(self.config.warehouse.clone(), env_rng)),
        }
    }

    fn learn_settings(&self, budget: engine::Budget) -> LearnSettings {
        LearnSettings {
            budget,
            max_episode_steps: self.config.max_episode_steps,
            filter: self.config.filter,
            reward_source: self.config.reward_source,
        }
    }

    /// Phase 1: primitive Q-learning with trace capture.
    pub fn primitive_phase(&self) -> Result<PrimitivePhase, HarnessError> {
        let c = &self.config;
        let budget = c.primitive_budget();
        let mut env = self.make_env(rng(c.seed, Stream::PrimitiveEnv));
        let mut q = QTable::new();
        let mut trace = Trace::new();
        engine::learn_options(
            env.as_mut(),
            &OptionStore::new(),
            &mut q,
            &c.params_for(budget),
            &self.learn_settings(budget),
            &mut rng(c.seed, Stream::PrimitiveAgent),
            Some(&mut trace),
        )?;
        Ok(PrimitivePhase { q, trace })
    }

    /// Phase 2: batch extraction over the whole trace.
    pub fn extract(&self, trace: &Trace) -> Result<OptionStore, HarnessError> {
        let env = self.make_env(rng(self.config.seed, Stream::PrimitiveEnv));
        Ok(options::extract_trace(
            trace,
            self.config.batch_size,
            self.config.max_option_length,
            env.as_ref(),
        )?)
    }

    /// Phase 3: learning over primitives and options, from a fresh table.
    pub fn learn_options(&self, store: &OptionStore) -> Result<QTable, HarnessError> {
        let c = &self.config;
        let budget = c.option_budget();
        let mut env = self.make_env(rng(c.seed, Stream::OptionEnv));
        let mut q = QTable::new();
        engine::learn_options(
            env.as_mut(),
            store,
            &mut q,
            &c.params_for(budget),
            &self.learn_settings(budget),
            &mut rng(c.seed, Stream::OptionAgent),
            None,
        )?;
        Ok(q)
    }

    /// Phase 4: one adaptation per state whose best action is an option.
    pub fn select(&self, store: &OptionStore, q: &QTable) -> Vec<Adaptation> {
        let env = self.make_env(rng(self.config.seed, Stream::OptionEnv));
        engine::select_adaptations(
            store,
            q,
            env.actions(),
            &self.config.filter,
            self.config.min_option_visits,
            env.as_ref(),
        )
    }

    /// Phase 5: exploitation with the primitive table and the given adaptations.
    pub fn evaluate(&self, base_q: &QTable, adaptations: &[Adaptation]) -> Result<(PhaseMetrics, Trace), HarnessError> {
        let c = &self.config;
        let mut env = self.make_env(rng(c.seed, Stream::EvalEnv));
        let mut registry = ContextRegistry::new();
        engine::install_adaptations(&mut registry, adaptations, env.actions(), c.max_option_length, &c.target)
            .map_err(engine::EngineError::from)?;
        let settings = PhaseSettings {
            budget: c.eval_budget(),
            max_episode_steps: c.max_episode_steps,
            epsilon: c.eval_epsilon,
            gamma: c.learning.gamma,
        };
        let mut trace = Trace::new();
        let m = engine::run_adaptive_phase(
            env.as_mut(),
            &mut registry,
            base_q,
            &settings,
            &mut rng(c.seed, Stream::EvalAgent),
            Some(&mut trace),
        )?;
        Ok((m, trace))
    }

    /// Runs phases 3 to 5 on an existing primitive phase and option store.
    pub fn run_with_store(&self, primitive: PrimitivePhase, store: OptionStore) -> Result<RunArtifacts, HarnessError> {
        let option_q = self.learn_options(&store)?;
        let adaptations = self.select(&store, &option_q);
        let (eval, eval_trace) = self.evaluate(&primitive.q, &adaptations)?;
        let c = &self.config;
        let mut metrics = Metrics::from_phase(c.env, c.seed, Mode::Autocop, &eval);
        metrics.options_extracted = store.len() as u64;
        metrics.states_with_options = store
            .states()
            .into_iter()
            .filter(|s| store.candidates_for(s).any(|o| c.filter.admits(o)))
            .count() as u64;
        metrics.adaptations_generated = adaptations.len() as u64;
        Ok(RunArtifacts {
            primitive,
            store,
            option_q,
            adaptations,
            eval,
            eval_trace,
            metrics,
        })
    }

    pub fn run(&self) -> Result<RunArtifacts, HarnessError> {
        let primitive = self.primitive_phase()?;
        let store = self.extract(&primitive.trace)?;
        self.run_with_store(primitive, store)
    }

    pub fn run_baseline(&self) -> Result<BaselineArtifacts, HarnessError> {
        let primitive = self.primitive_phase()?;
        let (eval, eval_trace) = self.evaluate(&primitive.q, &[])?;
        let c = &self.config;
        let metrics = Metrics::from_phase(c.env, c.seed, Mode::Baseline, &eval);
        Ok(BaselineArtifacts {
            primitive,
            eval,
            eval_trace,
            metrics,
        })
    }

    /// Context-Traits source for `a`, in this environment's brace style.
    pub fn stub(&self, a: &Adaptation) -> String {
        let style = self.make_env(rng(0, Stream::EvalEnv)).stub_style();
        engine::emit_stub(a, self.config.env.actions(), &self.config.target, style)
    }

    pub fn write_run(&self, dir: &Path, run: &RunArtifacts) -> Result<(), HarnessError> {
        let set = self.config.env.actions();
        let stubs = dir.join("stubs");
        create_dir(&stubs)?;
        write(&dir.join("trace.tsv"), &run.primitive.trace.to_tsv(set))?;
        write(&dir.join("eval_trace.tsv"), &run.eval_trace.to_tsv(set))?;
        write(&dir.join("options.txt"), &run.store.dump(set))?;
        write(&dir.join("adaptations.tsv"), &engine::manifest(&run.adaptations, set))?;
        write(&dir.join("q_primitive.tsv"), &run.primitive.q.to_text(set))?;
        write(&dir.join("q_options.tsv"), &run.option_q.to_text(set))?;
        for a in &run.adaptations {
            write(&stubs.join(format!("{}.js", a.context)), &self.stub(a))?;
        }
        write(&dir.join("metrics.csv"), &Metrics::to_csv(std::slice::from_ref(&run.metrics))?)?;
        write(&dir.join("report.txt"), &report::run_summary(&self.config, run))?;
        Ok(())
    }

    pub fn write_baseline(&self, dir: &Path, run: &BaselineArtifacts) -> Result<(), HarnessError> {
        let set = self.config.env.actions();
        create_dir(dir)?;
        write(&dir.join("trace.tsv"), &run.primitive.trace.to_tsv(set))?;
        write(&dir.join("eval_trace.tsv"), &run.eval_trace.to_tsv(set))?;
        write(&dir.join("metrics.csv"), &Metrics::to_csv(std::slice::from_ref(&run.metrics))?)?;
        write(&dir.join("report.txt"), &report::baseline_summary(&self.config, run))?;
        Ok(())
    }
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Full pipeline; writes artifacts when the config names an output directory.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<Metrics, HarnessError> {
    let p = Pipeline::new(config.clone())?;
    let run = p.run()?;
    if let Some(dir) = &config.out {
        p.write_run(dir, &run)?;
    }
    Ok(run.metrics)
}

/// Primitive learning and exploitation only.
pub fn run_baseline(config: &ExperimentConfig) -> Result<Metrics, HarnessError> {
    let p = Pipeline::new(config.clone())?;
    let run = p.run_baseline()?;
    if let Some(dir) = &config.out {
        p.write_baseline(dir, &run)?;
    }
    Ok(run.metrics)
}

/// Runs `k` pipelines with seeds `seed..seed + k` in parallel. Each writes to
/// `<out>/seed-<n>` and the merged rows go to `<out>/metrics.csv`.
pub fn run_repeated(config: &ExperimentConfig, k: u64, mode: Mode) -> Result<Vec<Metrics>, HarnessError> {
    let results: Vec<Result<Metrics, HarnessError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..k)
            .map(|i| {
                let mut c = config.clone();
                c.seed = config.seed + i;
                c.out = config.out.as_ref().map(|d| d.join(format!("seed-{}", c.seed)));
                scope.spawn(move || match mode {
                    Mode::Autocop => run_pipeline(&c),
                    Mode::Baseline => run_baseline(&c),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pipeline thread panicked"))
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some(dir) = &config.out {
        create_dir(dir)?;
        write(&dir.join("metrics.csv"), &Metrics::to_csv(&rows)?)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(env: EnvKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(env);
        c.steps = 400;
        c.episodes = 20;
        c
    }

    #[test]
    fn zero_budget_baseline_is_all_zero() {
        let mut c = small(EnvKind::Driving);
        c.steps = 0;
        let m = run_baseline(&c).unwrap();
        assert_eq!((m.decision_points, m.executed_actions), (0, 0));
        assert_eq!(m.events, Default::default());
    }

    #[test]
    fn baseline_executes_one_action_per_decision() {
        let m = run_baseline(&small(EnvKind::Driving)).unwrap();
        assert_eq!(m.decision_points, 400);
        assert_eq!(m.executed_actions, 400);
    }

    #[test]
    fn same_seed_same_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(EnvKind::Warehouse);
        c.out = Some(dir.path().join("a"));
        run_pipeline(&c).unwrap();
        c.out = Some(dir.path().join("b"));
        run_pipeline(&c).unwrap();
        for f in ["trace.tsv", "options.txt", "adaptations.tsv", "metrics.csv", "report.txt"] {
            let a = fs::read(dir.path().join("a").join(f)).unwrap();
            let b = fs::read(dir.path().join("b").join(f)).unwrap();
            assert_eq!(a, b, "{f} differs");
        }
    }

    #[test]
    fn baseline_writes_no_option_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(EnvKind::Driving);
        c.out = Some(dir.path().to_path_buf());
        run_baseline(&c).unwrap();
        assert!(dir.path().join("metrics.csv").exists());
        assert!(!dir.path().join("options.txt").exists());
        assert!(!dir.path().join("stubs").exists());
        assert!(!dir.path().join("adaptations.tsv").exists());
    }

    #[test]
    fn unwritable_output_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let mut c = small(EnvKind::Driving);
        c.steps = 10;
        c.out = Some(blocker.join("sub"));
        assert!(matches!(run_baseline(&c), Err(HarnessError::Io { .. })));
    }
}
