use thiserror::Error;

/// Errors shared by the numerical modules.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("argument within {dist:.3e} of a pole at {pole}")]
    Pole { pole: String, dist: f64 },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("series did not converge: {0}")]
    NonConvergence(String),
    #[error("contour geometry error: {0}")]
    Geometry(String),
    #[error("infeasible parameter scaling: {0}")]
    InfeasibleScaling(String),
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),
    #[error("singular factorization in determinant")]
    Singular,
    #[error("imaginary residual {0:.3e} exceeds tolerance")]
    ImagResidual(f64),
    #[error("quadrature tolerance unreachable: {0}")]
    ToleranceUnreachable(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
