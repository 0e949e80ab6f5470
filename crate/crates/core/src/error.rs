use thiserror::Error;

use crate::design::Arm;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("{what} = {value} is outside [0, 1]")]
    Domain { what: &'static str, value: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },

    #[error("bandwidth {theta} leaves the {arm} arm with zero kernel mass")]
    DegenerateBandwidth { arm: Arm, theta: f64 },

    #[error("enumeration of {what} too large: {size} exceeds the limit {limit}")]
    EnumerationTooLarge { what: &'static str, size: u128, limit: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no bandwidth on the grid yields well-defined weights in both arms")]
    NoFeasibleBandwidth,
}

/// Coarse classification used for process exit codes and error objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::InvalidDesign(_) | Error::Domain { .. } | Error::Dimension { .. } => ErrorKind::Data,
            Error::DegenerateBandwidth { .. } | Error::EnumerationTooLarge { .. } | Error::NoFeasibleBandwidth => {
                ErrorKind::Numeric
            }
        }
    }
}
