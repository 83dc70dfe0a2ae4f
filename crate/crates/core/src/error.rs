use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("input is not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state index {index} out of range for {num_states} states")]
    StateOutOfRange { index: usize, num_states: usize },

    #[error("singular evaluation system: {0}")]
    Singular(String),

    #[error("rank-1 update is ill-conditioned (denominator {denominator:e})")]
    IllConditioned { denominator: f64 },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Attach a description of what was running to an error.
pub(crate) fn with_context<T>(r: Result<T>, context: impl FnOnce() -> String) -> Result<T> {
    r.map_err(|e| Error::Run { context: context(), source: Box::new(e) })
}

impl Error {
    /// True for errors caused by bad user-supplied configuration or input files.
    pub fn is_config_error(&self) -> bool {
        if let Error::Run { source, .. } = self {
            return source.is_config_error();
        }
        matches!(
            self,
            Error::Config(_)
                | Error::Json(_)
                | Error::InvalidParameter(_)
                | Error::InvalidMdp(_)
                | Error::InvalidPolicy(_)
                | Error::Unsupported(_)
        )
    }
}
