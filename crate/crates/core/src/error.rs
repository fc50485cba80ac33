use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("singular system ({system}): {detail}")]
    Singular { system: &'static str, detail: String },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("non-finite state at step {step} (t = {t}), stage {stage}")]
    BlowUp { step: usize, t: f64, stage: usize },

    #[error("dispersion analysis failed: {0}")]
    Analysis(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures of the numerical pipeline (as opposed to bad
    /// configuration or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::Convergence { .. }
                | Error::BlowUp { .. }
                | Error::Analysis(_)
                | Error::Validation(_)
        )
    }
}
