use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature {index} has value {value}, outside [-1, 1]")]
    FeatureOutOfRange { index: usize, value: f64 },

    #[error("label must be -1 or +1, got {0}")]
    InvalidLabel(i64),

    #[error("parameter entry {index} is not finite ({value})")]
    NonFiniteParameter { index: usize, value: f64 },

    #[error("norm radius must be positive and finite, got {0}")]
    InvalidRadius(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid cardinality {requested} exceeds the cap of {cap} points")]
    CardinalityCap { requested: u128, cap: u128 },

    #[error("sequence is empty")]
    EmptySequence,

    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Stable machine-readable kind, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::FeatureOutOfRange { .. } => "feature_out_of_range",
            Error::InvalidLabel(_) => "invalid_label",
            Error::NonFiniteParameter { .. } => "non_finite_parameter",
            Error::InvalidRadius(_) => "invalid_radius",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::CardinalityCap { .. } => "cardinality_cap",
            Error::EmptySequence => "empty_sequence",
            Error::InfeasibleDesign(_) => "infeasible_design",
            Error::Unsupported(_) => "unsupported",
            Error::Io { .. } => "io",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
