use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pulse width tau = {tau} is under-resolved by grid step h = {step} (need tau >= 2h)")]
    PulseUnderresolved { tau: f64, step: f64 },

    #[error("pulse breakpoints do not align with the grid: {0}")]
    PulseMisaligned(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("CFL condition violated: courant ratio {ratio} > 1")]
    CflViolation { ratio: f64 },

    #[error("sampling interval {tau} is not an integer multiple of the time step {dt}")]
    SampleTimeMisaligned { tau: f64, dt: f64 },

    #[error("transfer series has {available} samples, {required} are needed")]
    InsufficientData { required: usize, available: usize },

    #[error("forward solve did not record boundary data")]
    MissingRecording,

    #[error("matrix is not positive definite: pivot {index} has value {value:e}")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("response matrix at sample {sample} is asymmetric (relative defect {defect:e})")]
    AsymmetricResponse { sample: usize, defect: f64 },

    #[error("operator of size {size} exceeds the spectral oracle limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("rate fit needs at least 3 rows with positive errors, got {0}")]
    TooFewRows(usize),

    #[error("run n = {n}: {source}")]
    Run {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotPositiveDefinite { .. } => 2,
            Error::Io { .. } => 3,
            Error::Run { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
