//! C ABI over the autocop pipeline.
//!
//! Every function returns an [`AutocopStatus`]; results come back through out
//! parameters. Handles are opaque and owned by the caller, who releases them
//! with the matching `*_free` function. Strings handed out by the library are
//! NUL-terminated and must be released with [`autocop_string_free`].
//!
//! After a non-`Ok` status, [`autocop_last_error`] describes the failure on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use autocop::env::EnvKind;
use autocop::harness::{BaselineArtifacts, ExperimentConfig, HarnessError, Metrics, Pipeline, RunArtifacts};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AutocopStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Run = 4,
    Io = 5,
    OutOfRange = 6,
    /// The run handle holds baseline results, which have no adaptations.
    NotAvailable = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AutocopEnv {
    Driving = 0,
    Warehouse = 1,
}

/// Counters of a finished run's exploitation phase.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AutocopMetrics {
    pub decision_points: u64,
    pub executed_actions: u64,
    pub adaptation_actuations: u64,
    pub crashes: u64,
    pub lane_violations: u64,
    pub speed_violations: u64,
    pub vehicles_encountered: u64,
    pub vehicles_overtaken: u64,
    pub deliveries: u64,
    pub incorrect_pickups: u64,
    pub incorrect_dropoffs: u64,
    pub episodes: u64,
    pub options_extracted: u64,
    pub states_with_options: u64,
    pub adaptations_generated: u64,
}

impl From<&Metrics> for AutocopMetrics {
    fn from(m: &Metrics) -> Self {
        Self {
            decision_points: m.decision_points,
            executed_actions: m.executed_actions,
            adaptation_actuations: m.adaptation_actuations,
            crashes: m.events.crashes,
            lane_violations: m.events.lane_violations,
            speed_violations: m.events.speed_violations,
            vehicles_encountered: m.events.vehicles_encountered,
            vehicles_overtaken: m.events.vehicles_overtaken,
            deliveries: m.events.deliveries,
            incorrect_pickups: m.events.incorrect_pickups,
            incorrect_dropoffs: m.events.incorrect_dropoffs,
            episodes: m.episode_lengths.len() as u64,
            options_extracted: m.options_extracted,
            states_with_options: m.states_with_options,
            adaptations_generated: m.adaptations_generated,
        }
    }
}

/// Experiment settings under construction.
pub struct AutocopConfig {
    inner: ExperimentConfig,
}

enum Outcome {
    Full(Box<RunArtifacts>),
    Baseline(Box<BaselineArtifacts>),
}

/// Results of one pipeline or baseline run.
pub struct AutocopRun {
    pipeline: Pipeline,
    outcome: Outcome,
}

impl AutocopRun {
    fn metrics(&self) -> &Metrics {
        match &self.outcome {
            Outcome::Full(r) => &r.metrics,
            Outcome::Baseline(b) => &b.metrics,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(AutocopStatus, String);

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let status = match e {
            HarnessError::Config(_) => AutocopStatus::Config,
            HarnessError::Io { .. } => AutocopStatus::Io,
            _ => AutocopStatus::Run,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: AutocopStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: Option<String>) {
    // Interior NULs cannot cross the ABI; they never occur in our messages.
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).unwrap_or_default());
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AutocopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            AutocopStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(Some(msg));
            status
        }
        Err(_) => {
            set_last_error(Some("internal panic".into()));
            AutocopStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(AutocopStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(AutocopStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    let s = deref(p, "path")?;
    let s = CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(AutocopStatus::InvalidArgument, "path is not UTF-8"))?;
    Ok(Path::new(s))
}

fn give_string(s: String, out: &mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| fail(AutocopStatus::Run, "string contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

/// Message for the most recent failure on this thread, or null after a
/// success. The pointer stays valid until the next library call on the
/// same thread; do not free it.
#[no_mangle]
pub extern "C" fn autocop_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default configuration for `env`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn autocop_config_new(env: AutocopEnv, out: *mut *mut AutocopConfig) -> AutocopStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let kind = match env {
            AutocopEnv::Driving => EnvKind::Driving,
            AutocopEnv::Warehouse => EnvKind::Warehouse,
        };
        *out = Box::into_raw(Box::new(AutocopConfig {
            inner: ExperimentConfig::new(kind),
        }));
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from [`autocop_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn autocop_config_free(config: *mut AutocopConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Overlays a flat TOML file on the configuration.
///
/// # Safety
/// `config` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn autocop_config_load(config: *mut AutocopConfig, path: *const c_char) -> AutocopStatus {
    guard(|| {
        let c = deref_mut(config, "config")?;
        let p = self::path(path)?;
        let mut next = c.inner.clone();
        next.apply_file(p)?;
        c.inner = next;
        Ok(())
    })
}

unsafe fn set(config: *mut AutocopConfig, f: impl FnOnce(&mut ExperimentConfig)) -> AutocopStatus {
    guard(|| {
        f(&mut deref_mut(config, "config")?.inner);
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn autocop_config_set_seed(config: *mut AutocopConfig, seed: u64) -> AutocopStatus {
    set(config, |c| c.seed = seed)
}

/// Primitive learning steps for non-episodic environments.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn autocop_config_set_steps(config: *mut AutocopConfig, steps: u64) -> AutocopStatus {
    set(config, |c| c.steps = steps)
}

/// Primitive learning episodes for episodic environments.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn autocop_config_set_episodes(config: *mut AutocopConfig, episodes: u64) -> AutocopStatus {
    set(config, |c| c.episodes = episodes)
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn autocop_config_set_batch_size(config: *mut AutocopConfig, batch_size: usize) -> AutocopStatus {
    set(config, |c| c.batch_size = batch_size)
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn autocop_config_set_max_option_length(config: *mut AutocopConfig, length: usize) -> AutocopStatus {
    set(config, |c| c.max_option_length = length)
}

unsafe fn start_run(
    config: *const AutocopConfig,
    out: *mut *mut AutocopRun,
    f: impl FnOnce(&Pipeline) -> Result<Outcome, HarnessError>,
) -> AutocopStatus {
    guard(|| {
        let c = deref(config, "config")?;
        let out = deref_mut(out, "out")?;
        c.inner.validate()?;
        let pipeline = Pipeline::new(c.inner.clone())?;
        let outcome = f(&pipeline)?;
        *out = Box::into_raw(Box::new(AutocopRun { pipeline, outcome }));
        Ok(())
    })
}

/// Full pipeline: learning, extraction, option learning, adaptation and
/// exploitation.
///
/// # Safety
/// `config` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn autocop_run(config: *const AutocopConfig, out: *mut *mut AutocopRun) -> AutocopStatus {
    start_run(config, out, |p| Ok(Outcome::Full(Box::new(p.run()?))))
}

/// Primitive learning and exploitation without adaptations.
///
/// # Safety
/// `config` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn autocop_run_baseline(config: *const AutocopConfig, out: *mut *mut AutocopRun) -> AutocopStatus {
    start_run(config, out, |p| Ok(Outcome::Baseline(Box::new(p.run_baseline()?))))
}

/// # Safety
/// `run` must be null or a handle from a run function not yet freed.
#[no_mangle]
pub unsafe extern "C" fn autocop_run_free(run: *mut AutocopRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn autocop_run_metrics(run: *const AutocopRun, out: *mut AutocopMetrics) -> AutocopStatus {
    guard(|| {
        let r = deref(run, "run")?;
        *deref_mut(out, "out")? = r.metrics().into();
        Ok(())
    })
}

/// Writes the run's artifacts (traces, option dump, stubs, metrics, report)
/// into `dir`, creating it if needed.
///
/// # Safety
/// `run` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn autocop_run_write(run: *const AutocopRun, dir: *const c_char) -> AutocopStatus {
    guard(|| {
        let r = deref(run, "run")?;
        let dir = path(dir)?;
        match &r.outcome {
            Outcome::Full(a) => r.pipeline.write_run(dir, a)?,
            Outcome::Baseline(b) => r.pipeline.write_baseline(dir, b)?,
        }
        Ok(())
    })
}

unsafe fn adaptations<'a>(run: *const AutocopRun) -> Result<(&'a AutocopRun, &'a [autocop::engine::Adaptation]), Failure> {
    let r = deref(run, "run")?;
    match &r.outcome {
        Outcome::Full(a) => Ok((r, &a.adaptations)),
        Outcome::Baseline(_) => Err(fail(AutocopStatus::NotAvailable, "baseline runs have no adaptations")),
    }
}

/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn autocop_run_adaptation_count(run: *const AutocopRun, out: *mut usize) -> AutocopStatus {
    guard(|| {
        let (_, list) = adaptations(run)?;
        *deref_mut(out, "out")? = list.len();
        Ok(())
    })
}

unsafe fn adaptation_string(
    run: *const AutocopRun,
    index: usize,
    out: *mut *mut c_char,
    f: impl FnOnce(&AutocopRun, &autocop::engine::Adaptation) -> String,
) -> AutocopStatus {
    guard(|| {
        let (r, list) = adaptations(run)?;
        let out = deref_mut(out, "out")?;
        let a = list
            .get(index)
            .ok_or_else(|| fail(AutocopStatus::OutOfRange, format!("index {index} of {}", list.len())))?;
        give_string(f(r, a), out)
    })
}

/// Context name of adaptation `index`, such as `Context6001`. Free the
/// result with [`autocop_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn autocop_run_adaptation_context(
    run: *const AutocopRun,
    index: usize,
    out: *mut *mut c_char,
) -> AutocopStatus {
    adaptation_string(run, index, out, |_, a| a.context.as_str().to_string())
}

/// Generated Context-Traits source of adaptation `index`. Free the result
/// with [`autocop_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn autocop_run_adaptation_stub(
    run: *const AutocopRun,
    index: usize,
    out: *mut *mut c_char,
) -> AutocopStatus {
    adaptation_string(run, index, out, |r, a| r.pipeline.stub(a))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed only once.
#[no_mangle]
pub unsafe extern "C" fn autocop_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_arguments_are_reported() {
        unsafe {
            assert_eq!(autocop_config_new(AutocopEnv::Driving, ptr::null_mut()), AutocopStatus::NullPointer);
            let msg = CStr::from_ptr(autocop_last_error()).to_str().unwrap();
            assert_eq!(msg, "out is null");
            assert_eq!(autocop_config_set_seed(ptr::null_mut(), 3), AutocopStatus::NullPointer);
            autocop_config_free(ptr::null_mut());
            autocop_run_free(ptr::null_mut());
            autocop_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn success_clears_the_last_error() {
        unsafe {
            assert_eq!(autocop_run_metrics(ptr::null(), ptr::null_mut()), AutocopStatus::NullPointer);
            assert!(!autocop_last_error().is_null());
            let mut c = ptr::null_mut();
            assert_eq!(autocop_config_new(AutocopEnv::Warehouse, &mut c), AutocopStatus::Ok);
            assert!(autocop_last_error().is_null());
            autocop_config_free(c);
        }
    }
}
