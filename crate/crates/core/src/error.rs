use thiserror::Error;

/// Errors raised anywhere in the latent-space pipeline.
#[derive(Debug, Error)]
pub enum LspieError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("requested {requested} latent directions but the data supports at most {available}")]
    Rank { requested: usize, available: usize },

    #[error("invalid state: {0}")]
    State(String),

    #[error("covariance is rank deficient; null directions {null_directions:?} (eigenvalue index, descending order)")]
    DegenerateRank { null_directions: Vec<usize> },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("metric `{0}` is already registered")]
    Conflict(String),

    #[error("metric `{metric}` returned {got} values, expected {expected}")]
    ContractViolation {
        metric: String,
        expected: usize,
        got: usize,
    },

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LspieError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LspieError::InvalidArgument(msg.into()))
}
