use thiserror::Error;

use crate::metric::PointId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown point id {0}")]
    UnknownPoint(PointId),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    /// A numeric argument violates the contract of the operation it feeds.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("value {0} outside the domain [0, 1]")]
    Range(f64),

    #[error("matrix is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("projection did not converge after {sweeps} sweeps (residual {residual:e})")]
    Convergence { sweeps: usize, residual: f64 },

    /// The lower pointwise Lipschitz inequality fails at `witness`.
    #[error("rate {rate} violated at point {witness} by {excess:e}")]
    Rate {
        rate: f64,
        witness: PointId,
        excess: f64,
    },

    #[error("radius search at point {point} fell below the floor {delta_min:e}")]
    DegenerateRadius { point: PointId, delta_min: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("no radius yields a ball around point {0} containing another sample point")]
    Resolution(PointId),

    #[error("round {round}, anchor {point}: {source}")]
    Anchor {
        round: usize,
        point: PointId,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// Innermost error, looking through anchor context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Anchor { source, .. } => source.root(),
            other => other,
        }
    }
}
