//! Synthetic identification of de-identified clinical notes, and a
//! linear-chain CRF de-identification tagger evaluated against them.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`corpusgen`] writes placeholder-bearing template notes (`[**Hospital1 18**]`).
//! 2. [`note::parse_placeholders`] turns placeholders into single-token
//!    sentinels with standoff [`note::PhiSpan`]s.
//! 3. [`surrogen::synthesize_corpus`] substitutes sampled surrogates and
//!    derives gold token labels.
//! 4. [`features`] and [`crf`] extract per-token features and train the tagger.
//! 5. [`eval`] scores predictions at the token level and runs learning curves.

pub mod corpusgen;
pub mod crf;
pub mod eval;
pub mod features;
pub mod fixtures;
pub mod note;
mod parallel;
pub mod rng;
pub mod surrogen;
pub mod tagger;

use thiserror::Error;

pub use note::{Label, Note, PhiCategory, PhiSpan, Token};
pub use surrogen::LabeledNote;
pub use tagger::Tagger;

/// Any error produced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Note(#[from] note::NoteError),
    #[error(transparent)]
    Surrogate(#[from] surrogen::SurrogateError),
    #[error(transparent)]
    Gen(#[from] corpusgen::GenError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Crf(#[from] crf::CrfError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
