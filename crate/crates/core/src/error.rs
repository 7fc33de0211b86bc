use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}: missing or unrecognized header (expected one of: {expected})")]
    MissingHeader {
        source_name: String,
        expected: &'static str,
    },

    #[error("{source_name}, line {line}: {message}")]
    MalformedRow {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("{source_name}, line {line}: negative value {value}")]
    NegativeValue {
        source_name: String,
        line: u64,
        value: f64,
    },

    #[error("{source_name}, line {line}: duplicate zone '{zone}'")]
    DuplicateZone {
        source_name: String,
        line: u64,
        zone: String,
    },

    #[error("records from survey '{found}' mixed into survey '{expected}'")]
    MixedSurvey { expected: String, found: String },

    #[error("invalid zone reference: {0}")]
    InvalidZoneRef(String),

    #[error("empty network: total strength is zero")]
    EmptyNetwork,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "power iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("point '{label}' has non-positive {field} ({value})")]
    NonPositivePoint {
        label: String,
        field: &'static str,
        value: f64,
    },

    #[error("degenerate regressor: all log10 populations are equal")]
    DegenerateRegressor,

    #[error("matrix is not symmetric (max defect {0:e})")]
    Asymmetric(f64),

    #[error("matrix size {n} exceeds dense cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("duplicate survey id '{0}'")]
    DuplicateSurvey(String),

    #[error("no ranking for survey '{0}'")]
    MissingRanking(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that come from bad input files or arguments rather
    /// than from the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MissingHeader { .. }
                | Error::MalformedRow { .. }
                | Error::NegativeValue { .. }
                | Error::DuplicateZone { .. }
                | Error::MixedSurvey { .. }
                | Error::InvalidZoneRef(_)
                | Error::DuplicateSurvey(_)
                | Error::MissingRanking(_)
                | Error::InvalidArgument(_)
                | Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
