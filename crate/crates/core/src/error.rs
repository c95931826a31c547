use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("subsystem {} has no unique equilibrium", .index + 1)]
    NoUniqueEquilibrium { index: usize },
    #[error("subsystem {} admits no certificate: {reason}", .index + 1)]
    NoCertificate { index: usize, reason: String },
    #[error("epsilon {epsilon} puts the ISS rate at {rate}, outside its legal range")]
    BadEpsilon { epsilon: f64, rate: f64 },
    #[error("delta {delta} outside the legal interval ({lo}, {hi})")]
    BadDelta { delta: f64, lo: f64, hi: f64 },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("disturbance index {index} out of range (have {len} samples)")]
    OutOfRange { index: u64, len: usize },
    #[error("invalid switching signal: {0}")]
    InvalidSignal(String),
    #[error("trajectory diverged at t = {time}")]
    Diverged { time: f64 },
    #[error("no certificate for subsystem {}", .index + 1)]
    MissingCertificate { index: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {message}")]
    Load { context: String, message: String },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Underlying error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
