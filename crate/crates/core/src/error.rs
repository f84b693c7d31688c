use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (failed after jitter {max_jitter:e})")]
    NotPositiveDefinite { max_jitter: f64 },

    #[error("matrix is not symmetric: |A[{row},{col}] - A[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("network produced a non-finite value at row {row}, output {col}")]
    NonFiniteOutput { row: usize, col: usize },

    #[error("unsupported Matérn smoothness {0}; expected 0.5, 1.5 or 2.5")]
    UnsupportedSmoothness(f64),

    #[error("kernel kind {kind} requires nonstationary {what} values")]
    MissingNonstatValues { kind: &'static str, what: &'static str },

    #[error("the 1-D lengthscale kernel needs d = 1 inputs, got d = {0}")]
    LengthscaleKernelDimension(usize),

    #[error("noise variance must be positive, got {0:e}")]
    NonPositiveNoise(f64),

    #[error("inducing-point Gram matrix is singular under the jitter schedule")]
    SingularInducingGram,

    #[error("gradient component {0} is not finite")]
    NonFiniteGradient(String),

    #[error("parameter update produced a non-finite value at index {0}")]
    NonFiniteUpdate(usize),

    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("predictive variance at index {index} is not positive ({value:e})")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: String, message: String },

    #[error("target column {0:?} not found")]
    MissingTarget(String),

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("model file schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u32 },

    #[error("corrupt model file: {0}")]
    CorruptFile(String),

    #[error("stationary model has no nonstationary parameters to recover")]
    StationaryModelHasNoNonstatParams,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonFiniteOutput { .. } => "NonFiniteOutput",
            Error::UnsupportedSmoothness(_) => "UnsupportedSmoothness",
            Error::MissingNonstatValues { .. } => "MissingNonstatValues",
            Error::LengthscaleKernelDimension(_) => "DimensionError",
            Error::NonPositiveNoise(_) => "NonPositiveNoise",
            Error::SingularInducingGram => "SingularInducingGram",
            Error::NonFiniteGradient(_) => "NonFiniteGradient",
            Error::NonFiniteUpdate(_) => "NonFiniteUpdate",
            Error::Diverged { .. } => "Diverged",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::NonPositiveVariance { .. } => "NonPositiveVariance",
            Error::Parse { .. } => "ParseError",
            Error::MissingTarget(_) => "MissingTarget",
            Error::TooFewRows { .. } => "TooFewRows",
            Error::SchemaVersionMismatch { .. } => "SchemaVersionMismatch",
            Error::CorruptFile(_) => "CorruptFile",
            Error::StationaryModelHasNoNonstatParams => "StationaryModelHasNoNonstatParams",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io { .. } => "Io",
        }
    }

    pub(crate) fn dims(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
