use thiserror::Error;

/// Errors raised by the model, solver and game routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("a contention graph needs at least one link")]
    EmptyGraph,

    #[error("graph has {n} links, more than the supported {max}")]
    TooManyLinks { n: usize, max: usize },

    #[error("link id {link} is outside 1..={n}")]
    LinkOutOfRange { link: usize, n: usize },

    #[error("self-loop on link {0}")]
    SelfLoop(usize),

    #[error("exact state enumeration is capped at {cap} links, graph has {n}")]
    EnumerationCap { n: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("transmission aggressiveness for link {link} is NaN")]
    NotANumber { link: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("price must be non-negative, got {0}")]
    NegativePrice(f64),

    #[error("rate {0} is outside [0, 1]")]
    RateOutOfRange(f64),

    #[error("result has no recorded stages")]
    NoStages,

    #[error("degenerate demand set: {0}")]
    DegenerateDemand(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
