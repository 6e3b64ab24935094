use std::path::PathBuf;

use thiserror::Error;

use crate::picard::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite data: {0}")]
    Data(String),

    /// The kernel violates the integrability requirements on G and G''.
    #[error("inadmissible kernel: {0}")]
    Admissibility(String),

    /// A sampled witness breaks the growth or Lipschitz bound of the rate function.
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("solver refused: {0}")]
    Refused(String),

    #[error("Picard iteration did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence {
        iterations: usize,
        last_residual: f64,
        residuals: Vec<f64>,
        ratios: Vec<f64>,
        /// The last iterate with its report, so callers can still write artifacts.
        partial: Box<Solution>,
    },

    #[error("window {index} of global march failed: {source}")]
    March {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("failed to read {path}: {message}")]
    Input { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::Dimension { expected, found })
        }
    }
}
