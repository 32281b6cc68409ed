use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the crate.
///
/// The variants group into the three failure classes a caller usually cares
/// about: bad input ([`Error::is_input`]), numerical breakdown
/// ([`Error::Numerical`]) and failures of an external model process
/// ([`Error::Evaluation`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("distribution error: {0}")]
    Distribution(String),

    #[error("degenerate function: {0}")]
    Degenerate(String),

    #[error("numerical error: {message} (condition estimate {condition:.3e})")]
    Numerical { message: String, condition: f64 },

    #[error("model evaluation failed: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for every variant caused by the caller's arguments rather than
    /// by numerics or an external process.
    pub fn is_input(&self) -> bool {
        !matches!(self, Error::Numerical { .. } | Error::Evaluation(_) | Error::Io(_))
    }

    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Dimension { .. } => "dimension",
            Error::Domain(_) => "domain",
            Error::Resource(_) => "resource",
            Error::Contract(_) => "contract",
            Error::Unsupported(_) => "unsupported",
            Error::Distribution(_) => "distribution",
            Error::Degenerate(_) => "degenerate",
            Error::Numerical { .. } => "numerical",
            Error::Evaluation(_) => "evaluation",
            Error::Io(_) => "io",
        }
    }
}
