use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("{path}: non-numeric cell at row {row}, column {column}")]
    NonNumericCell {
        path: PathBuf,
        row: usize,
        column: usize,
    },

    #[error("{path}: inconsistent row length at row {row} (expected {expected} fields, found {found})")]
    InconsistentRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: time column is not strictly increasing at row {row}")]
    NonMonotoneTime { path: PathBuf, row: usize },

    #[error("sampling rate disagreement: inferred {inferred} Hz, given {given} Hz")]
    SamplingRateMismatch { inferred: f64, given: f64 },

    #[error("{0}: no time column and no sampling rate given")]
    MissingSamplingRate(PathBuf),

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("binary COMTRADE not supported")]
    BinaryComtrade,

    #[error("multi-rate not supported")]
    MultiRate,

    #[error("fundamental above Nyquist (fs = {fs} Hz, f = {f} Hz)")]
    AboveNyquist { fs: f64, f: f64 },

    #[error("pulsation aliases to DC/Nyquist")]
    DegeneratePulsation,

    #[error("record too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("LMS diverged at sample {0}; reduce mu")]
    Diverged(usize),

    #[error("{0} levels too many for a signal of length {1}")]
    TooManyLevels(usize, usize),

    #[error("cascade did not converge after {iterations} iterations (sup difference {sup_diff:e})")]
    NoConvergence { iterations: usize, sup_diff: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stage '{stage}' failed on channel '{channel}': {source}")]
    Stage {
        stage: &'static str,
        channel: String,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str, channel: &str) -> Error {
        Error::Stage {
            stage,
            channel: channel.to_string(),
            source: Box::new(self),
        }
    }
}
