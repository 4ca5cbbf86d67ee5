use thiserror::Error;

/// Failure categories shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The rate pair is in the wrong regime (critical/subcritical) for the formula.
    #[error("regime error: {0}")]
    Regime(String),

    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A Fourier window or sample count could not resolve the requested law.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// An age/time grid is inconsistent or too short to hold the population mass.
    #[error("grid error: {0}")]
    Grid(String),

    /// A Laplace transform was requested at or below the growth abscissa.
    #[error("divergence error: {0}")]
    Divergence(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }

    pub(crate) fn grid(msg: impl Into<String>) -> Self {
        Error::Grid(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
