//! Name-popularity estimation and identical-name record linkage.
//!
//! The pipeline: parse and normalize records ([`records`]), count full names
//! and components ([`counts`]), fit one of nine popularity models
//! ([`estimators`]), optionally extrapolating unseen types with an LNRE model
//! ([`lnre`]), then evaluate ([`evaluation`]) or link ([`linkage`]).
//! [`synth`] generates seeded populations with known ground truth.

pub mod counts;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod exec;
mod hash;
pub mod linkage;
pub mod lnre;
pub mod records;
pub mod spectrum;
pub mod svg;
pub mod synth;

pub use counts::{Component, CountTable, Pair};
pub use error::{Error, Result};
pub use estimators::{ESemantics, ModelKind, NameModel, SmoothingConfig, UnseenEstimate};
pub use evaluation::{BucketSpec, EvalReport, TestCounts};
pub use exec::Execution;
pub use linkage::{LinkageConfig, LinkageResult, UniquenessStrategy};
pub use lnre::{FitConfig, LnreModel};
pub use records::{Mode, NameKey, NamedRecord, Person, PersonSet};
pub use spectrum::{FrequencySpectrum, Target};
pub use synth::SynthConfig;

/// Hex sha256 of a byte string, as used for content fingerprints.
pub fn content_hash(bytes: &[u8]) -> String {
    hash::sha256_hex(bytes)
}
