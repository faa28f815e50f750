use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown distribution tag `{0}`")]
    UnknownDistribution(String),

    #[error("right-hand side has mean {mean:e} on a component of the singular operator")]
    NonZeroMean { mean: f64 },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("change of variables is not injective: eps * sup|g'| = {0}")]
    InjectivityGuard(f64),

    #[error("missing boundary value for site {0}")]
    MissingBoundary(usize),

    #[error("system too large: {0}")]
    TooLarge(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
