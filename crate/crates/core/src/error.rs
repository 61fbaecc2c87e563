use crate::C64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A grid point violates the stationarity region of its family.
    #[error("nonstationary point: {0}")]
    Nonstationary(String),

    /// A denominator in the fixed-point system vanished.
    #[error("singular {what} at z = {z}")]
    Singular { what: &'static str, z: C64 },

    /// Non-finite values or a failed decomposition.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Nonstationary(_) => "nonstationary",
            Error::Singular { .. } => "singular",
            Error::Numeric(_) => "numeric",
        }
    }
}
