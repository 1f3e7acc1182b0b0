//! Command-line experiment runner: resolves a configuration, runs the
//! selected experiment and writes deterministic CSV reports.

pub mod config;
pub mod experiments;
pub mod matio;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind, Overrides};
pub use experiments::run_experiment;
pub use report::{write_reports, ReportRow, RunOutput};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    ConfigInvalid(String),
    #[error("io {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("solver: {0}")]
    Solver(#[from] bcs_core::Error),
}
