use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value encountered in {0}")]
    NotFinite(&'static str),
    #[error("Lanczos did not converge in {iterations} iterations (estimate {estimate:e} > tol {tol:e})")]
    NonConvergence {
        iterations: usize,
        estimate: f64,
        tol: f64,
    },
    #[error("workspace was produced with step {stored:e}, requested {requested:e}")]
    StaleWorkspace { stored: f64, requested: f64 },
    #[error("too many rejections ({rejections}) at t = {t:e}")]
    MaxRejections { t: f64, rejections: usize },
    #[error("grid of {points} points exceeds the dense oracle cap of {cap}")]
    OracleTooLarge { points: usize, cap: usize },
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

impl Error {
    /// Failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotFinite(_)
                | Error::NonConvergence { .. }
                | Error::MaxRejections { .. }
                | Error::Eigen(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
