use std::path::PathBuf;

use crate::geometry::Position;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("observation covariance is not positive definite after jitter escalation{}", fmt_dups(.duplicates))]
    Factorization { duplicates: Vec<Position> },

    #[error("insufficient neighborhood: {found} observations, at least {required} required")]
    InsufficientNeighborhood { found: usize, required: usize },

    #[error("observations mix time slots {first} and {other}")]
    MixedSlots { first: u32, other: u32 },

    #[error("position ({}, {}) lies outside the field coverage", .0.x, .0.y)]
    OutOfCoverage(Position),

    #[error("no value recorded at position ({}, {})", .0.x, .0.y)]
    NoRecordedValue(Position),

    #[error("grid shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("every evaluation cell is masked")]
    AllMasked,

    #[error("lattice of {points} points exceeds the dense sampling limit of {limit}")]
    LatticeTooLarge { points: usize, limit: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_dups(dups: &[Position]) -> String {
    if dups.is_empty() {
        return String::new();
    }
    let list: Vec<String> = dups.iter().map(|p| format!("({}, {})", p.x, p.y)).collect();
    format!("; duplicate positions: {}", list.join(", "))
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
