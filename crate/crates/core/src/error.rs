use thiserror::Error;

/// Errors raised by the selection, solver and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability {0} must lie strictly between 0 and 1")]
    InvalidProbability(f64),

    #[error("degrees of freedom must be at least 1, got {0}")]
    InvalidDegreesOfFreedom(u64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mean gap {gap} does not exceed the indifference level {delta}; instance would leave Theta(Delta)")]
    OutsideIndifferenceZone { gap: f64, delta: f64 },

    #[error("expected {expected} populations, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("no sign change found after {attempts} bracket expansions (last bracket [{lo}, {hi}])")]
    BracketExpansion { attempts: u32, lo: f64, hi: f64 },

    #[error("root solver did not converge within {iterations} iterations")]
    NoConvergence { iterations: u32 },

    #[error("quadrature did not reach tolerance within {panels} panels")]
    Quadrature { panels: usize },

    #[error("weight system has no real solution (target sum of squares {target} below 1/N = {floor})")]
    InfeasibleWeights { target: f64, floor: f64 },

    #[error("h-constant for k = {k}: {source}")]
    AtK {
        k: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
