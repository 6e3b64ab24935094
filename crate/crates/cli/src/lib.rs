//! Command implementations behind the `dkpp` binary. Each command validates a
//! [`config::RunConfig`], runs the solver and writes a run directory.

pub mod commands;
pub mod config;
pub mod snapshot;

use std::path::Path;

use thiserror::Error;

pub use commands::{
    cmd_certify, cmd_emit_plot, cmd_march, cmd_solve, cmd_study, PlotKind, StudyMode, EXIT_INADMISSIBLE,
    EXIT_NONCONVERGENCE, EXIT_OK, EXIT_VALIDATION,
};
pub use config::RunConfig;
pub use snapshot::Snapshot;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed config, failed assumption checks, I/O trouble.
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Inadmissible(String),
    #[error("{0}")]
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Inadmissible(_) => EXIT_INADMISSIBLE,
            CliError::NonConvergence(_) => EXIT_NONCONVERGENCE,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{}: {e}", path.display()))
    }
}
