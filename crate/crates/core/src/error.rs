use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the model, the estimator and the file front-ends.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParameters(Vec<String>),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("roll angle {0} rad is outside (-pi/2, pi/2)")]
    RollOutOfRange(f64),

    #[error("degenerate configuration: mass matrix condition number {0:.3e}")]
    DegenerateConfiguration(f64),

    #[error("non-finite value encountered at t = {t}: {state}")]
    NonFinite { t: f64, state: String },

    #[error("trim did not converge after {iterations} iterations (residual {residual:.3e})")]
    TrimNoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian in {0}")]
    SingularJacobian(&'static str),

    #[error("speed {0} m/s outside the supported trim range [5, 60]")]
    SpeedOutOfRange(f64),

    #[error("finite-difference check failed on column {column}: relative deviation {deviation:.3e}")]
    Linearization { column: usize, deviation: f64 },

    #[error("(A, C) is not detectable: unobservable mode at {re:+.4e}{im:+.4e}i")]
    NotDetectable { re: f64, im: f64 },

    #[error("Riccati iteration failed: {0}")]
    Riccati(String),

    #[error("observer closed loop is not Hurwitz (max real part {0:.4e})")]
    NotHurwitz(f64),

    #[error("trace length mismatch: {0}")]
    TraceMismatch(String),

    #[error("missing column '{column}' in {file}")]
    MissingColumn { column: String, file: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
