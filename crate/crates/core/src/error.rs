use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("removal policy undefined: {0}")]
    UndefinedPolicy(String),

    #[error("degenerate full conditional: {0}")]
    Degenerate(String),

    #[error("rejection sampler gave up after {attempts} proposals (envelope bound {bound}, last weight {last_weight})")]
    Sampler {
        attempts: usize,
        bound: f64,
        last_weight: f64,
    },

    #[error("state space of {size} entries exceeds enumeration cap {cap}")]
    Capacity { size: usize, cap: usize },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
