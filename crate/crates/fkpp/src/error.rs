use thiserror::Error;

/// Errors surfaced by the numerical routines.
///
/// Soft conditions (saturated optimizers, non-converged brackets, capped
/// branching runs) are reported through flags on result types, not through
/// this enum; only genuine precondition violations and unusable grids are
/// hard errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("no level crossing: {0}")]
    NoCrossing(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
