//! Crate-wide error type.

use alloc::string::String;

/// Errors produced by slice-state handling, the simulator and the learners.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An observation component fell outside the configured bucket domain.
    #[error("{component} = {value} outside domain [{lo}, {hi}]")]
    Domain {
        component: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    /// A scalar parameter violated its precondition.
    #[error("invalid parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },
    /// A scenario or component configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A transition model failed a structural check (e.g. non-stochastic row).
    #[error("invalid model: {0}")]
    Model(String),
    /// decide/feedback called out of order.
    #[error("protocol violation: {0}")]
    Protocol(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(reason: impl Into<String>) -> Self {
        Error::Config(reason.into())
    }
}
