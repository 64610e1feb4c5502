use std::io;

use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("measurement contains no time bins")]
    EmptyMeasurement,

    #[error("inconsistent bin counts: {0}")]
    InconsistentCounts(String),

    #[error("no emitters in ensemble")]
    NoEmitters,

    #[error("efficiency out of range for emitter {index}: {value}")]
    EfficiencyOutOfRange { index: usize, value: f64 },

    #[error("ratio undefined: marginal click probability is zero")]
    UndefinedRatio,

    #[error("variance is singular: both-silent probability is zero")]
    SingularVariance,

    #[error("witness d = {d:e} is not positive; nonclassicality cannot be violated")]
    NotViolable { d: f64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("singular fit: all abscissae are equal")]
    SingularFit,

    #[error("time-tag stream: {0}")]
    Stream(#[from] StreamError),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed layout file: {0}")]
    Layout(String),

    #[error("malformed detection model config: {0}")]
    Config(String),
}

/// Failures specific to reading or writing IONTAG streams.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum StreamError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown regime code {0}")]
    UnknownRegime(u8),
    #[error("truncated payload: header announced {expected} records, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("truncated header")]
    TruncatedHeader,
    #[error("record {index} goes back in time ({time_ps} ps < {previous_ps} ps)")]
    TimeOrder { index: u64, time_ps: u64, previous_ps: u64 },
    #[error("record {index} has invalid channel {channel}")]
    BadChannel { index: u64, channel: u8 },
    #[error("trailing bytes after the last record")]
    TrailingBytes,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
