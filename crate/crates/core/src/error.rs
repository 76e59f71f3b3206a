use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// No TDOA can keep the anchor phase below pi once the 3-sigma noise
    /// margin is subtracted.
    #[error("infeasible anchor: 3 * phase noise std ({three_sigma:.6} rad) >= pi")]
    InfeasibleAnchor { three_sigma: f64 },

    #[error("degenerate sample: zero-magnitude CIR peak (target fade)")]
    DegenerateSample,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: cannot parse {content:?} as a timestamp")]
    Parse {
        path: PathBuf,
        line: usize,
        content: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("infeasible window: {0}")]
    InfeasibleWindow(String),

    #[error("problem too large: {breakpoints} breakpoints exceed the limit of {limit}")]
    ProblemTooLarge { breakpoints: u64, limit: u64 },

    /// More than the tolerated share of Monte-Carlo trials had no admissible
    /// packet selection.
    #[error("{failed} of {total} trials infeasible: {reason}")]
    TooManyInfeasible {
        failed: usize,
        total: usize,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
