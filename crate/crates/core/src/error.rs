use thiserror::Error;

/// Errors raised across the simulation and analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("least-squares system is rank deficient (pivot {pivot:e} at column {column})")]
    RankDeficient { column: usize, pivot: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NotConverged { sweeps: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unphysical input: {0}")]
    Unphysical(String),

    #[error("unreliable estimate: denominator {denominator:e} below {threshold}")]
    UnreliableEstimate { denominator: f64, threshold: f64 },

    #[error("no real solution (discriminant {discriminant:e})")]
    NoSolution { discriminant: f64 },

    #[error("extraction undefined: chi element {element:e} below threshold {threshold:e}")]
    ExtractionUndefined { element: f64, threshold: f64 },

    #[error("basis mismatch: {left} vs {right}")]
    BasisMismatch { left: String, right: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of the linear algebra itself (singular or rank-deficient systems,
    /// non-Hermitian input, no convergence, no real root).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular
                | Error::RankDeficient { .. }
                | Error::NotHermitian { .. }
                | Error::NotUnitary { .. }
                | Error::NotConverged { .. }
                | Error::NoSolution { .. }
                | Error::UnreliableEstimate { .. }
                | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
