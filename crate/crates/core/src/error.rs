use thiserror::Error;

/// Errors raised by the simulator and the attack toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A structurally invalid configuration (bad LFSR spec, seed, modulus, noise model).
    #[error("configuration error: {0}")]
    Config(String),
    /// A well-formed request with an out-of-range or inconsistent argument.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A guarded operation declined to run (intractable enumeration, too few checks).
    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}

pub(crate) fn refused<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Refused(msg.into()))
}
