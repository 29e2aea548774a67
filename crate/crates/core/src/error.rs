use thiserror::Error;

/// Failure modes shared by every simulation and formula in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violates a documented precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },

    /// A stop rule was not reached within the configured step budget.
    #[error("step budget of {steps} exhausted before {what}")]
    BudgetExhausted { steps: u64, what: &'static str },

    /// The input is well-formed but degenerate for the requested estimate.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Returns a domain error unless `cond` holds.
pub(crate) fn ensure(
    cond: bool,
    name: &'static str,
    reason: impl FnOnce() -> String,
) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::domain(name, reason()))
    }
}
