//! Experiment driver behind the command-line tool.

pub mod config;
pub mod metrics;
pub mod pipeline;
pub mod render;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use metrics::{Metrics, Mode};
pub use pipeline::{run_baseline, run_pipeline, run_repeated, BaselineArtifacts, Pipeline, PrimitivePhase, RunArtifacts};
pub use render::render_path;
pub use report::compare_report;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
    #[error(transparent)]
    Options(#[from] crate::options::OptionsError),
    #[error(transparent)]
    Trace(#[from] crate::trace::TraceError),
}
