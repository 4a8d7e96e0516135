//! Surrogate generation: weighted lexicons, per-category surrogate shapes and
//! substitution of sampled surrogates into parsed notes.

mod lexicon;
mod surrogate;
mod synth;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::note::{Label, Note, PhiCategory};

pub use lexicon::{Lexicon, LexiconEntry, LexiconKind, Lexicons};
pub use surrogate::{days_in_month, make_surrogate, SurrogateConfig, SurrogatePlan};
pub use synth::{synthesize_corpus, synthesize_note, token_labels};

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("EmptyLexicon: {0}")]
    EmptyLexicon(String),
    #[error("NonPositiveWeight: line {0}")]
    NonPositiveWeight(usize),
    #[error("MalformedWeight: line {0}: {1:?}")]
    MalformedWeight(usize, String),
    #[error("DuplicateSurface: line {0}")]
    DuplicateSurface(usize),
    #[error("MissingLexicon: no lexicon for {0}")]
    MissingLexicon(String),
    #[error("InvalidNote: {note_id}: {message}")]
    InvalidNote { note_id: String, message: String },
    #[error("IoError: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SurrogateError {
    fn missing(category: PhiCategory, what: &str) -> Self {
        SurrogateError::MissingLexicon(format!("{category} ({what})"))
    }
}

/// A synthetically-identified note with one gold label per token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledNote {
    #[serde(flatten)]
    pub note: Note,
    #[serde(rename = "labels")]
    pub token_labels: Vec<Label>,
}

impl LabeledNote {
    /// Note invariants plus label/token agreement.
    pub fn validate(&self) -> Result<(), String> {
        self.note.validate()?;
        let expected = token_labels(&self.note);
        if expected.len() != self.token_labels.len() {
            return Err(format!(
                "{} labels for {} tokens",
                self.token_labels.len(),
                expected.len()
            ));
        }
        if expected != self.token_labels {
            return Err("labels disagree with PHI spans".into());
        }
        Ok(())
    }
}

pub fn read_labeled_corpus(path: impl AsRef<std::path::Path>) -> Result<Vec<LabeledNote>, crate::note::NoteError> {
    crate::note::io::read_jsonl(path, LabeledNote::validate)
}

pub fn write_labeled_corpus(
    notes: &[LabeledNote],
    path: impl AsRef<std::path::Path>,
) -> Result<(), crate::note::NoteError> {
    crate::note::io::write_jsonl(notes, path)
}
