use thiserror::Error;

use crate::model::Site;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration field failed validation; `path` is the dotted field path.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    /// An enumeration would exceed its configured budget.
    #[error("budget exceeded for {what}: need {needed}, budget is {budget}")]
    Budget {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("boundary condition undefined at site {0}")]
    BoundaryUndefined(Site),

    #[error("configuration does not assign a spin to every site (expected {expected}, got {got})")]
    IncompleteConfiguration { expected: usize, got: usize },

    #[error("activity kind {kind} cannot be evaluated on this polymer: {reason}")]
    KindMismatch { kind: &'static str, reason: String },

    /// A constant needed by a check is not positive, so the check is refused.
    #[error("constant {name} is not usable ({value}); see the bounds report")]
    NonPositiveConstant { name: &'static str, value: f64 },
}

impl Error {
    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub(crate) fn check_budget(what: &'static str, needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        Err(Error::Budget {
            what,
            needed,
            budget,
        })
    } else {
        Ok(())
    }
}

/// `base^exp` saturating at `u128::MAX`.
pub(crate) fn saturating_pow(base: usize, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}
