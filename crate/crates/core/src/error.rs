use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid index range [{j_min}, {j_max}]")]
    InvalidRange { j_min: i64, j_max: i64 },

    #[error("chain is not ergodic: {0}")]
    NonErgodic(String),

    #[error("innovation window [{got_min}, {got_max}] does not match weight window [{want_min}, {want_max}]")]
    WindowMismatch {
        want_min: i64,
        want_max: i64,
        got_min: i64,
        got_max: i64,
    },

    #[error(
        "truncation tolerance {eps:e} unattainable within a window cap of {cap} terms \
         (certified tail fraction {achieved:e} at the cap)"
    )]
    TruncationFailure { eps: f64, cap: usize, achieved: f64 },

    #[error("{0}")]
    Domain(String),

    #[error("covariances are not summable: {0}")]
    NonSummable(String),

    #[error("series tolerance {tol:e} unreachable within {max_terms} terms")]
    ToleranceUnreachable { tol: f64, max_terms: usize },

    #[error("condition {condition} failed: {detail}")]
    ConditionFailed { condition: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
