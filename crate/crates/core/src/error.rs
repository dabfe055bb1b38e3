use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance matrix indefinite: most negative eigenvalue {min_eigenvalue:e}")]
    IndefiniteCovariance { min_eigenvalue: f64 },

    #[error("quadrature did not converge: achieved error estimate {achieved:e} > tolerance {tolerance:e}")]
    QuadratureNonConvergence { achieved: f64, tolerance: f64 },

    #[error("no ruin events observed over {n} paths; consider importance sampling or a larger budget")]
    NoRuinEvents { n: usize },

    #[error("extrapolated slope {0} is not positive; the target constant is positive by definition")]
    NonPositiveSlope(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
