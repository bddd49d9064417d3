use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is singular to working precision (reciprocal condition estimate {rcond:.3e})")]
    Singular { rcond: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("realization is not minimal (controllable rank {controllable_rank}, observable rank {observable_rank}, order {n})")]
    NotMinimal {
        n: usize,
        controllable_rank: usize,
        observable_rank: usize,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositive(String),

    #[error("point {z} lies at distance {distance:.3e} from the spectrum")]
    NearPole { z: num_complex::Complex64, distance: f64 },

    #[error("spectral condition violated: {0}")]
    SpectralCondition(String),

    #[error("inconsistent state: {0}")]
    Inconsistent(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
