use std::io;

use thiserror::Error;

use crate::records::Mode;
use crate::spectrum::Target;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: duplicate record id `{id}`")]
    DuplicateRecord { row: usize, id: String },

    #[error("record `{0}` has no person id")]
    MissingPersonId(String),

    #[error("name has an empty {0} after normalization")]
    EmptyName(&'static str),

    #[error("rewrite rules do not reach a fixed point on `{0}`")]
    RulesDiverge(String),

    #[error("invalid rule on line {line}: {message}")]
    InvalidRule { line: usize, message: String },

    #[error("mode mismatch: expected {expected}, found {found}")]
    ModeMismatch { expected: Mode, found: Mode },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("spectrum class r={0} is not populated")]
    UnpopulatedClass(u64),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("model {kind} needs an unseen-type estimate E for {target}, none available")]
    MissingUnseenEstimate { kind: String, target: Target },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by the caller's data or flags, as opposed to a failed
    /// computation on valid input.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Numerical(_) | Error::DegenerateSpectrum(_) | Error::MissingUnseenEstimate { .. }
        )
    }
}
