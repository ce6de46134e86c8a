use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inputs outside the domain of an operation (empty dimensions, length
    /// mismatches, invalid parameters).
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is valid but exceeds what this implementation will do
    /// at the requested size.
    #[error("capability error: {0}")]
    Capability(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("degenerate spectrum: leading eigenvalue {0} is not positive")]
    DegenerateSpectrum(f64),

    #[error("iterate became non-finite at step {step}")]
    Divergence { step: usize },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub(crate) fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} has length {got}, expected {expected}"
        )))
    }
}
