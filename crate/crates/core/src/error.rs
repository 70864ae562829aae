use thiserror::Error;

/// Errors raised by the scheduling library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two hall calls share the same (floor, direction) pair.
    #[error("duplicate hall call at floor {floor} going {direction}")]
    DuplicateCall { floor: usize, direction: crate::Direction },

    /// The capacity penalty does not dominate every honest feasibility penalty.
    #[error("capacity penalty {penalty} s does not exceed honest penalty {honest} s")]
    PenaltyTooSmall { penalty: f64, honest: f64 },

    /// Exhaustive enumeration would exceed the configured budget.
    #[error("enumeration of {required} assignments exceeds budget {budget}")]
    BudgetExceeded { required: u128, budget: u64 },

    /// A single-car service plan failed to reach every requested stop.
    #[error("service plan did not terminate after {0} transitions")]
    PlanDiverged(usize),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
