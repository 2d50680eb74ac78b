use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("invalid shape {shape:?} for {len} elements")]
    InvalidShape { shape: Vec<usize>, len: usize },

    #[error("non-finite value {value} at element {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("relative L1 distance against a zero-norm reference")]
    ZeroDenominator,

    #[error("sinusoidal embedding needs an even dimension, got {0}")]
    OddDimension(usize),

    #[error("invalid model config: {0}")]
    InvalidModelConfig(String),

    #[error("value out of range: {0}")]
    BadRange(String),

    #[error("uniform cache interval {interval} outside [1, {steps}]")]
    BadInterval { interval: usize, steps: usize },

    #[error("reuse requested before any cached residual exists")]
    NoCachedResidual,

    #[error("need at least {needed} points for the fit, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("least-squares design matrix is rank deficient")]
    DegenerateDesign,

    #[error("zero variance in correlation input")]
    DegenerateVariance,

    #[error("data range must be positive, got {0}")]
    BadDataRange(f64),

    #[error("grid {rows}x{cols} is smaller than one {window}x{window} window")]
    GridTooSmall {
        rows: usize,
        cols: usize,
        window: usize,
    },

    #[error("rescaler file not found: {}", .0.display())]
    MissingRescaler(PathBuf),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable identifier used in machine-readable error lines and FFI error codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::InvalidShape { .. } => "InvalidShape",
            Error::NonFinite { .. } => "NonFinite",
            Error::ZeroDenominator => "ZeroDenominator",
            Error::OddDimension(_) => "OddDimension",
            Error::InvalidModelConfig(_) => "InvalidModelConfig",
            Error::BadRange(_) => "BadRange",
            Error::BadInterval { .. } => "BadInterval",
            Error::NoCachedResidual => "NoCachedResidual",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::DegenerateDesign => "DegenerateDesign",
            Error::DegenerateVariance => "DegenerateVariance",
            Error::BadDataRange(_) => "BadDataRange",
            Error::GridTooSmall { .. } => "GridTooSmall",
            Error::MissingRescaler(_) => "MissingRescaler",
            Error::Config { .. } => "ConfigError",
            Error::Format { .. } => "FormatError",
            Error::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
