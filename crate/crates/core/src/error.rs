use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a domain invariant (mass, positivity, distinctness...).
    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty mixture")]
    EmptyMixture,

    #[error("dense tensor would need {entries} entries (cap {cap}); use the compressed layout")]
    DenseCap { entries: u128, cap: u128 },

    #[error("tensor is not symmetric: entry {index:?} differs from its sorted twin by {asymmetry}")]
    Asymmetric { index: Vec<usize>, asymmetry: f64 },

    #[error("sign-split violation: {negative} negative vs {positive} positive coefficients (m = {m})")]
    SignSplit { m: usize, negative: usize, positive: usize },

    #[error("mixtures share components; reduce first")]
    SharedComponents,

    #[error("internal assertion failed: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            detail: detail.into(),
        }
    }

    /// True for errors caused by malformed input rather than a broken invariant.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Dimension(_)
        )
    }
}
