use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("mass matrix is not positive definite on active dofs (pivot {pivot} at dof {dof})")]
    SingularMass { dof: usize, pivot: f64 },

    #[error("singular operator: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { iterations: usize, what: String },

    #[error("zero gradient at iterate {iteration} (|grad| = {norm:e})")]
    ZeroGradient { iteration: usize, norm: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("binding error: {0}")]
    Binding(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable class name, stable across releases.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Domain(_) => "domain",
            Error::QuadratureFailure(_) => "quadrature-failure",
            Error::SingularMass { .. } => "singular-mass",
            Error::Singular(_) => "singular",
            Error::NoConvergence { .. } => "no-convergence",
            Error::ZeroGradient { .. } => "zero-gradient",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Format(_) => "format",
            Error::Binding(_) => "binding",
            Error::Io(_) => "io",
        }
    }
}
