use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid event spec: {0}")]
    InvalidSpec(String),

    #[error("graph has no planted root")]
    MissingRoot,

    #[error("expected vertex count {expected:.4e} exceeds cap {cap:.4e}")]
    ResourceExhausted { expected: f64, cap: f64 },

    #[error("integral diverges: {0}")]
    Divergence(String),

    #[error("quadrature did not reach the requested tolerance: {0}")]
    QuadratureFailed(String),

    #[error("fixture too large: {0}")]
    FixtureTooLarge(String),

    #[error("outside the quantitative phase: {0}")]
    Regime(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
