//! Option-level learning, adaptation selection, stub generation and the
//! adaptive execution phase.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::cop::{BehavioralAdaptation, ContextId, ContextRegistry, CopError};
use crate::env::{Environment, Events, Transition};
use crate::options::{GoalTest, OptionCandidate, OptionStore};
use crate::rl::{self, ActionKey, LearningParams, QTable, RlError};
use crate::space::{ActionId, ActionSeq, ActionSet, StateKey};
use crate::trace::{Trace, TraceError, TraceRecord};

/// Receiver name used in generated stubs.
pub const DEFAULT_TARGET: &str = "agent";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("option for {expected} started in {found}")]
    WrongContext { expected: String, found: String },
    #[error(transparent)]
    Cop(#[from] CopError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Where the learning signal comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RewardSource {
    /// The environment's reward model.
    #[default]
    Environment,
    /// +1 for every executed primitive action.
    FixedPositive,
    /// +1 for every decision, however many actions it executes.
    Frequency,
}

impl RewardSource {
    fn primitive(self, env_reward: f64) -> f64 {
        match self {
            RewardSource::Environment => env_reward,
            RewardSource::FixedPositive | RewardSource::Frequency => 1.0,
        }
    }

    fn option(self, result: &OptionExecutionResult, gamma: f64) -> f64 {
        match self {
            RewardSource::Environment => result.discounted_return,
            RewardSource::FixedPositive => (0..result.steps).map(|t| gamma.powi(t as i32)).sum(),
            RewardSource::Frequency => 1.0,
        }
    }
}

/// Which candidates take part in option-level learning.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OptionFilter {
    pub min_length: usize,
    /// Only candidates that reached a goal at least once in the trace.
    pub require_goal: bool,
}

impl Default for OptionFilter {
    fn default() -> Self {
        OptionFilter {
            min_length: 2,
            require_goal: true,
        }
    }
}

impl OptionFilter {
    pub fn admits(&self, c: &OptionCandidate) -> bool {
        c.len() >= self.min_length && (!self.require_goal || c.goal_count > 0)
    }
}

/// Primitives followed by the admitted options for `s`.
pub fn available_actions(set: &ActionSet, store: &OptionStore, s: &StateKey, filter: &OptionFilter) -> Vec<ActionKey> {
    set.ids()
        .map(ActionKey::Primitive)
        .chain(
            store
                .candidates_for(s)
                .filter(|c| filter.admits(c))
                .map(|c| ActionKey::Option(c.actions.clone())),
        )
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adaptation {
    pub context: ContextId,
    pub actions: ActionSeq,
    pub source_state: StateKey,
    pub q_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptionExecutionResult {
    /// `Σ γ^t r_t` over the executed steps.
    pub discounted_return: f64,
    pub steps: u32,
    pub final_state: StateKey,
    pub terminal: bool,
    pub transitions: Vec<Transition>,
}

impl OptionExecutionResult {
    pub fn events(&self) -> impl Iterator<Item = Events> + '_ {
        self.transitions.iter().map(|t| t.events)
    }
}

/// Runs `actions` to completion from `initiation`, bracketed by activation
/// and deactivation of the state's context.
///
/// If the context is not yet bound, it is bound for the duration of the call
/// and withdrawn afterwards. An episode ending mid-option ends it early.
pub fn execute_option<E: Environment + ?Sized>(
    env: &mut E,
    initiation: &StateKey,
    actions: &ActionSeq,
    registry: &mut ContextRegistry,
    gamma: f64,
) -> Result<OptionExecutionResult, EngineError> {
    let found = env.observe();
    let ctx = ContextId::for_state(initiation);
    if found.context_name() != ctx.as_str() {
        return Err(EngineError::WrongContext {
            expected: ctx.to_string(),
            found: found.context_name(),
        });
    }
    let transient = registry.binding(&ctx).is_none();
    registry.adapt(ctx.clone(), BehavioralAdaptation::new(actions.clone())?, DEFAULT_TARGET)?;
    registry.activate(&ctx)?;
    let seq = match registry.dispatch(&found) {
        crate::cop::Behavior::Adaptation(ba) => ba.actions().clone(),
        crate::cop::Behavior::Base => unreachable!("activated context must dispatch"),
    };

    let mut result = OptionExecutionResult {
        discounted_return: 0.0,
        steps: 0,
        final_state: found,
        terminal: false,
        transitions: Vec::with_capacity(seq.len()),
    };
    let mut discount = 1.0;
    for a in seq.iter() {
        let t = env.step(*a);
        result.discounted_return += discount * t.reward;
        discount *= gamma;
        result.steps += 1;
        result.final_state = t.next_state.clone();
        result.terminal = t.terminal;
        result.transitions.push(t);
        if result.terminal {
            break;
        }
    }

    registry.deactivate(&ctx)?;
    if transient {
        registry.withdraw(&ctx)?;
    }
    Ok(result)
}

/// Length of a learning or evaluation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    /// Decision points, for continuing tasks.
    Steps(u64),
    Episodes(u64),
}

impl Budget {
    pub fn amount(self) -> u64 {
        match self {
            Budget::Steps(n) | Budget::Episodes(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnSettings {
    pub budget: Budget,
    /// Decision cap per episode for episodic environments.
    pub max_episode_steps: u64,
    pub filter: OptionFilter,
    pub reward_source: RewardSource,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LearnStats {
    pub decisions: u64,
    pub executed_actions: u64,
    pub option_choices: u64,
    pub episodes: u64,
}

/// Drives decision points for a budget, resetting episodic environments on
/// termination or at the step cap. `decide` gets the ε-schedule index.
fn run_budget<E, F>(env: &mut E, budget: Budget, max_episode_steps: u64, mut decide: F) -> Result<u64, EngineError>
where
    E: Environment + ?Sized,
    F: FnMut(&mut E, u64, u64) -> Result<bool, EngineError>,
{
    let episodic = env.is_episodic();
    let mut t = 0u64;
    let mut episode = 0u64;
    env.reset();
    'outer: loop {
        if let Budget::Episodes(n) = budget {
            if episode >= n {
                break;
            }
        }
        let mut in_episode = 0u64;
        loop {
            if let Budget::Steps(n) = budget {
                if t >= n {
                    break 'outer;
                }
            }
            let schedule_index = match budget {
                Budget::Steps(_) => t,
                Budget::Episodes(_) => episode,
            };
            let terminal = decide(env, schedule_index, episode)?;
            t += 1;
            in_episode += 1;
            if terminal || (episodic && in_episode >= max_episode_steps) {
                break;
            }
        }
        episode += 1;
        env.reset();
    }
    Ok(episode)
}

fn log_steps(
    trace: &mut Option<&mut Trace>,
    episode: Option<u64>,
    start: &StateKey,
    actions: &[ActionId],
    transitions: &[Transition],
) -> Result<(), TraceError> {
    let Some(trace) = trace.as_deref_mut() else {
        return Ok(());
    };
    let mut state = start.clone();
    for (a, t) in actions.iter().zip(transitions) {
        trace.append(TraceRecord {
            step: trace.len() as u64,
            episode,
            state,
            action: *a,
            next_state: t.next_state.clone(),
            reward: t.reward,
        })?;
        state = t.next_state.clone();
    }
    Ok(())
}

/// ε-greedy Q-learning over primitives and the admitted options of `store`.
///
/// With an empty store this is plain one-step Q-learning. Every executed
/// primitive step is appended to `trace` when one is given.
pub fn learn_options<E, R>(
    env: &mut E,
    store: &OptionStore,
    q: &mut QTable,
    params: &LearningParams,
    settings: &LearnSettings,
    rng: &mut R,
    mut trace: Option<&mut Trace>,
) -> Result<LearnStats, EngineError>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    params.validate()?;
    let set = env.actions();
    let filter = settings.filter;
    let mut scratch = ContextRegistry::new();
    let mut stats = LearnStats::default();

    stats.episodes = run_budget(env, settings.budget, settings.max_episode_steps, |env, index, episode| {
        let episode = env.is_episodic().then_some(episode);
        let s = env.observe();
        let avail = available_actions(set, store, &s, &filter);
        let a = rl::select_epsilon_greedy(q, &s, &avail, params.epsilon_at(index), rng)?.clone();
        let (reward, k, next, terminal) = match &a {
            ActionKey::Primitive(id) => {
                let t = env.step(*id);
                log_steps(&mut trace, episode, &s, &[*id], std::slice::from_ref(&t))?;
                (settings.reward_source.primitive(t.reward), 1, t.next_state, t.terminal)
            }
            ActionKey::Option(seq) => {
                let res = execute_option(env, &s, seq, &mut scratch, params.gamma)?;
                log_steps(&mut trace, episode, &s, seq, &res.transitions)?;
                stats.option_choices += 1;
                let reward = settings.reward_source.option(&res, params.gamma);
                (reward, res.steps, res.final_state, res.terminal)
            }
        };
        stats.decisions += 1;
        stats.executed_actions += u64::from(k);
        let avail_next = if terminal {
            Vec::new()
        } else {
            available_actions(set, store, &next, &filter)
        };
        rl::update_q(q, &s, &a, reward, &next, k, &avail_next, params)?;
        Ok(terminal)
    })?;
    Ok(stats)
}

/// One adaptation per non-goal state whose greedy action is an option.
///
/// Options never updated `min_visits` times are left out of the comparison so
/// that an untried option cannot win on its default value.
pub fn select_adaptations(
    store: &OptionStore,
    q: &QTable,
    set: &ActionSet,
    filter: &OptionFilter,
    min_visits: u64,
    goals: &(impl GoalTest + ?Sized),
) -> Vec<Adaptation> {
    let mut out = Vec::new();
    for s in store.states() {
        if goals.is_goal_state(s) {
            continue;
        }
        let avail: Vec<ActionKey> = available_actions(set, store, s, filter)
            .into_iter()
            .filter(|a| !a.is_option() || q.visits(s, a) >= min_visits)
            .collect();
        if !avail.iter().any(ActionKey::is_option) {
            continue;
        }
        let Ok(best) = rl::argmax_q(q, s, &avail) else {
            continue;
        };
        if let ActionKey::Option(seq) = best {
            if seq.len() >= 2 {
                out.push(Adaptation {
                    context: ContextId::for_state(s),
                    actions: seq.clone(),
                    source_state: s.clone(),
                    q_value: q.get(s, best),
                });
            }
        }
    }
    out
}

/// Binds every adaptation in `registry`, checking it against the action set.
pub fn install_adaptations(
    registry: &mut ContextRegistry,
    adaptations: &[Adaptation],
    set: &ActionSet,
    max_option_length: usize,
    target: &str,
) -> Result<(), CopError> {
    for a in adaptations {
        let ba = BehavioralAdaptation::new(a.actions.clone())?;
        ba.validate(set, max_option_length)?;
        registry.adapt(a.context.clone(), ba, target)?;
    }
    Ok(())
}

/// Brace spacing of the generated `option` function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StubStyle {
    /// `function(){`
    #[default]
    Tight,
    /// `function() {`
    Spaced,
}

/// Context-Traits source for one adaptation.
pub fn emit_stub(adaptation: &Adaptation, set: &ActionSet, target: &str, style: StubStyle) -> String {
    let ctx = adaptation.context.as_str();
    let open = match style {
        StubStyle::Tight => "function(){",
        StubStyle::Spaced => "function() {",
    };
    let mut out = String::new();
    let _ = writeln!(out, "{ctx} = new cop.Context({{ name: \"{ctx}\"}})");
    let _ = writeln!(out, "BA{ctx} = Trait({{");
    let _ = writeln!(out, "  option: {open}");
    for a in adaptation.actions.iter() {
        let _ = writeln!(out, "    this.{}();", set.name(*a));
    }
    out.push_str("  }\n})\n");
    let _ = writeln!(out, "{ctx}.adapt({target}, BA{ctx})");
    out
}

/// `state<TAB>[actions]<TAB>q` lines.
pub fn manifest(adaptations: &[Adaptation], set: &ActionSet) -> String {
    let mut out = String::new();
    for a in adaptations {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            a.source_state.canonical(),
            set.format_seq(&a.actions),
            a.q_value
        );
    }
    out
}

/// Counters for environment events.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub crashes: u64,
    pub lane_violations: u64,
    pub speed_violations: u64,
    pub too_slow: u64,
    pub vehicles_encountered: u64,
    pub vehicles_overtaken: u64,
    pub pickups: u64,
    pub deliveries: u64,
    pub incorrect_pickups: u64,
    pub incorrect_dropoffs: u64,
}

impl EventCounts {
    pub fn add(&mut self, e: Events) {
        let pairs = [
            (Events::CRASH, &mut self.crashes),
            (Events::LANE_VIOLATION, &mut self.lane_violations),
            (Events::SPEED_VIOLATION, &mut self.speed_violations),
            (Events::TOO_SLOW, &mut self.too_slow),
            (Events::VEHICLE_ENCOUNTERED, &mut self.vehicles_encountered),
            (Events::VEHICLE_OVERTAKEN, &mut self.vehicles_overtaken),
            (Events::PICKUP, &mut self.pickups),
            (Events::DELIVERY, &mut self.deliveries),
            (Events::INCORRECT_PICKUP, &mut self.incorrect_pickups),
            (Events::INCORRECT_DROPOFF, &mut self.incorrect_dropoffs),
        ];
        for (flag, counter) in pairs {
            *counter += u64::from(e.contains(flag));
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EpisodeStats {
    pub decision_points: u64,
    pub executed_actions: u64,
    pub reward: f64,
    pub completed: bool,
}

/// What the adaptive phase observed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseMetrics {
    pub decision_points: u64,
    pub executed_actions: u64,
    pub adaptation_actuations: u64,
    pub events: EventCounts,
    /// Per-episode figures, for episodic environments.
    pub episodes: Vec<EpisodeStats>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSettings {
    pub budget: Budget,
    pub max_episode_steps: u64,
    pub epsilon: f64,
    pub gamma: f64,
}

/// Exploitation with adaptations installed in `registry`.
///
/// A sensed state with a bound context runs its adaptation to completion;
/// otherwise an ε-greedy primitive is taken from `q`.
pub fn run_adaptive_phase<E, R>(
    env: &mut E,
    registry: &mut ContextRegistry,
    q: &QTable,
    settings: &PhaseSettings,
    rng: &mut R,
    mut trace: Option<&mut Trace>,
) -> Result<PhaseMetrics, EngineError>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    let primitives: Vec<ActionKey> = env.actions().ids().map(ActionKey::Primitive).collect();
    let mut m = PhaseMetrics::default();
    let mut current = EpisodeStats::default();
    let mut current_episode = 0u64;

    run_budget(env, settings.budget, settings.max_episode_steps, |env, _, episode| {
        if episode != current_episode {
            m.episodes.push(std::mem::take(&mut current));
            current_episode = episode;
        }
        let tag = env.is_episodic().then_some(episode);
        let s = env.observe();
        let adaptation = registry
            .sensed(&s)
            .and_then(|c| registry.binding(c))
            .map(|b| b.adaptation.actions().clone());
        let (executed, terminal) = match adaptation {
            Some(seq) => {
                let res = execute_option(env, &s, &seq, registry, settings.gamma)?;
                log_steps(&mut trace, tag, &s, &seq, &res.transitions)?;
                m.adaptation_actuations += 1;
                for t in &res.transitions {
                    m.events.add(t.events);
                    current.reward += t.reward;
                }
                (u64::from(res.steps), res.terminal)
            }
            None => {
                let a = rl::select_epsilon_greedy(q, &s, &primitives, settings.epsilon, rng)?;
                let ActionKey::Primitive(id) = *a else {
                    unreachable!("only primitives are offered")
                };
                let t = env.step(id);
                log_steps(&mut trace, tag, &s, &[id], std::slice::from_ref(&t))?;
                m.events.add(t.events);
                current.reward += t.reward;
                (1, t.terminal)
            }
        };
        m.decision_points += 1;
        m.executed_actions += executed;
        current.decision_points += 1;
        current.executed_actions += executed;
        current.completed = terminal;
        Ok(terminal)
    })?;
    if env.is_episodic() && current.decision_points > 0 {
        m.episodes.push(current);
    }
    Ok(m)
}
