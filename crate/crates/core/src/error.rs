use std::path::PathBuf;

use thiserror::Error;

/// A single `(row, column)` cell that cannot go through a strict logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct LogOffender {
    pub row: usize,
    pub column: String,
    pub value: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("E_SCHEMA: {0}")]
    Schema(String),

    #[error("E_PARSE: row {row}, column '{column}': cannot parse {value:?} ({reason})")]
    Parse {
        row: usize,
        column: String,
        value: String,
        reason: String,
    },

    #[error("E_LABEL: row {row}: label {value:?} is not one of 0, 1, true, false")]
    Label { row: usize, value: String },

    #[error("E_UNKNOWN_FEATURE: {0}")]
    UnknownFeature(String),

    #[error("E_PROB: {0}")]
    Probability(String),

    #[error("E_EMPTY: {0}")]
    Empty(String),

    #[error("E_NF: file count must be at least 1, got {0}")]
    FileCount(f64),

    #[error("E_UNDEFINED: {0}")]
    Undefined(&'static str),

    #[error("E_ONE_CLASS: {0}")]
    OneClass(String),

    #[error("E_LOG_DOMAIN: {} cell(s) not strictly positive, first at row {} column '{}' (value {})",
        .0.len(), .0[0].row, .0[0].column, .0[0].value)]
    LogDomain(Vec<LogOffender>),

    #[error("E_MISSING_PARAMS: no normalization parameters for column '{0}'")]
    MissingParams(String),

    #[error("E_TOO_SMALL: {0}")]
    TooSmall(String),

    #[error("E_DIM: {0}")]
    Dim(String),

    #[error("E_DEGENERATE: {0}")]
    Degenerate(String),

    #[error("E_FEATURE_MISMATCH: {0}")]
    FeatureMismatch(String),

    #[error("E_NONFINITE: {0}")]
    NonFinite(String),

    #[error("E_SPEC: {0}")]
    Spec(String),

    #[error("E_IO: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("E_IO: {0}")]
    Csv(#[from] csv::Error),

    #[error("in combination [{combination}]: {source}")]
    Combination {
        combination: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The `E_*` code of this error, looking through combination annotations.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(_) => "E_SCHEMA",
            Error::Parse { .. } => "E_PARSE",
            Error::Label { .. } => "E_LABEL",
            Error::UnknownFeature(_) => "E_UNKNOWN_FEATURE",
            Error::Probability(_) => "E_PROB",
            Error::Empty(_) => "E_EMPTY",
            Error::FileCount(_) => "E_NF",
            Error::Undefined(_) => "E_UNDEFINED",
            Error::OneClass(_) => "E_ONE_CLASS",
            Error::LogDomain(_) => "E_LOG_DOMAIN",
            Error::MissingParams(_) => "E_MISSING_PARAMS",
            Error::TooSmall(_) => "E_TOO_SMALL",
            Error::Dim(_) => "E_DIM",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::FeatureMismatch(_) => "E_FEATURE_MISMATCH",
            Error::NonFinite(_) => "E_NONFINITE",
            Error::Spec(_) => "E_SPEC",
            Error::Io { .. } | Error::Csv(_) => "E_IO",
            Error::Combination { source, .. } => source.code(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
