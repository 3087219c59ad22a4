use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("alignment calibration failed for phase {phase}: {reason}")]
    CalibrationFailed { phase: usize, reason: String },

    #[error("MAC counter mismatch: measured {measured}, model {model}")]
    CounterMismatch { measured: u64, model: u64 },

    #[error("reference signal has zero energy")]
    ZeroReference,

    #[error("Jacobi eigen-decomposition did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("gallery is empty")]
    EmptyGallery,

    #[error("feature database is empty")]
    EmptyDb,

    #[error("feature database entry {id:?} has zero energy")]
    ZeroEnergyEntry { id: String },

    #[error("{}: parse error: {message}", file.display())]
    Parse { file: PathBuf, message: String },

    #[error("{}: dimensions {found:?} differ from {expected:?}", file.display())]
    HeterogeneousDims {
        file: PathBuf,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by input data rather than by caller configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::HeterogeneousDims { .. }
                | Error::Io { .. }
                | Error::EmptyGallery
                | Error::EmptyDb
                | Error::ZeroEnergyEntry { .. }
                | Error::NonFinite(_)
                | Error::ConvergenceFailure { .. }
        )
    }
}
