use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain is entirely dry")]
    AllDry,

    #[error("solver became unstable at t = {time} s: {detail}")]
    Instability { time: f64, detail: String },

    #[error("member {member} failed in cycle {cycle}: {source}")]
    MemberFailure {
        member: usize,
        cycle: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cycle {cycle} aborted: {failed} of {total} members failed")]
    CycleAborted { cycle: usize, failed: usize, total: usize },

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error("value {value} outside rating curve range (max {max})")]
    OutOfRange { value: f64, max: f64 },

    #[error("undefined CSI: both maps are entirely dry")]
    UndefinedCsi,

    #[error("raster geometries do not overlap")]
    GeometryMismatch,

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("timestamps not strictly increasing at {path}:{line}")]
    NonMonotonic { path: String, line: usize },

    #[error("no common timestamps in the comparison window")]
    EmptyOverlap,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// True for failures of the numerics (instability, singular gain,
    /// aborted cycles) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Instability { .. }
            | Error::Singular(_)
            | Error::CycleAborted { .. }
            | Error::AllDry
            | Error::UndefinedCsi => true,
            Error::MemberFailure { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
