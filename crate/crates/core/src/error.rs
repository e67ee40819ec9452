use thiserror::Error;

/// Errors produced by the group testing library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncated support still misses mass {tail:e} (limit {eps:e}) at cutoff {cutoff}")]
    Truncation { tail: f64, eps: f64, cutoff: usize },

    #[error("distribution is not normalized (total mass {0})")]
    NotNormalized(f64),

    #[error("malformed edge list at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
