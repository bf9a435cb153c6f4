use thiserror::Error;

/// Errors produced by model fitting, acquisition and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A Cholesky factorization kept failing after the largest diagonal jitter.
    #[error("numeric failure in {context}: factorization failed with jitter {jitter:e}")]
    NumericFailure { context: String, jitter: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The objective returned a value above its declared optimum by more than the slack.
    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("trial failed at iteration {iteration}: {source}")]
    Trial {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::Trial { .. } => e,
            e => Error::Trial {
                iteration,
                source: Box::new(e),
            },
        }
    }
}
