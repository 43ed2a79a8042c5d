use std::fmt;

use thiserror::Error;

/// Which hard cap an excursion ran into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cap {
    Individuals,
    Horizon,
}

impl fmt::Display for Cap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cap::Individuals => f.write_str("max individuals"),
            Cap::Horizon => f.write_str("max tau"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An excursion breached a configured cap. Carries the statistics of the
    /// partial excursion at the time of the breach.
    #[error("excursion hit {cap} cap: {individuals} individuals, {alive} alive at t = {elapsed}")]
    ResourceLimit {
        cap: Cap,
        individuals: usize,
        alive: usize,
        elapsed: f64,
    },

    #[error("shard {shard}, draw {draw}: {source}")]
    Shard {
        shard: u64,
        draw: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("internal numerical failure: {0}")]
    Numerical(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    #[error("cannot bracket root: {0}")]
    Bracket(String),

    #[error("no plateau: {0}")]
    NoPlateau(String),

    #[error("ensemble alpha {found} does not match requested alpha {expected}")]
    AlphaMismatch { expected: f64, found: f64 },

    #[error("line {line}: {reason}")]
    Load { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
