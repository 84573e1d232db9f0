use thiserror::Error;

use crate::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mode index {index} out of range for {modes} modes")]
    IndexOutOfRange { index: usize, modes: usize },

    #[error("empty input")]
    Empty,

    #[error("length mismatch: {values} values but {weights} log-weights")]
    LengthMismatch { values: usize, weights: usize },

    /// An error bar was requested from fewer than two batches.
    #[error("error estimate undefined with {batches} batch(es) over {len} samples")]
    UndefinedError { batches: usize, len: usize },

    #[error("ensemble extinct at generation {generation}: no valid trajectories survive")]
    Extinction { generation: u64 },

    #[error("matrix is not antisymmetric (max deviation {0:e})")]
    NotAntisymmetric(f64),

    #[error("extended covariance is singular")]
    SingularCovariance,

    #[error("oracle size cap exceeded: {0}")]
    SizeCap(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("finite-difference step {0:e} underflows at this scale")]
    StepUnderflow(f64),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
