use thiserror::Error;

use crate::interconnect::InterconnectError;
use crate::io::IoError;
use crate::lti::LtiError;
use crate::models::ModelError;
use crate::mor::MorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Interconnect(#[from] InterconnectError),
    #[error(transparent)]
    Mor(#[from] MorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl Error {
    /// Numerical failures (singular solves, non-convergence, unreachable
    /// accuracy) as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Lti(e) => e.is_numerical(),
            Error::Interconnect(e) => e.is_numerical(),
            Error::Mor(e) => e.is_numerical(),
            Error::Model(_) => false,
            Error::Io(e) => e.is_numerical(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
