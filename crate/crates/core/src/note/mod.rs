//! Clinical note representation: tokenizer, placeholder parser, corpus I/O and
//! corpus statistics.

pub mod io;
mod placeholder;
mod stats;
mod tokenize;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_corpus, write_corpus};
pub use placeholder::{
    parse_note, parse_placeholders, sentinel, CategoryMapping, MappingRule, ParseOutcome,
    ParseWarning, Strictness,
};
pub use stats::{corpus_stats, coverage_percent, rate_percent, CategoryCounts, CorpusStats};
pub use tokenize::{is_word_char, tokenize, tokenize_line};

#[derive(Debug, Error)]
pub enum NoteError {
    #[error("UnmappedPlaceholder: no mapping rule matches {inner:?} (line {line}, offset {offset})")]
    UnmappedPlaceholder {
        inner: String,
        line: usize,
        offset: usize,
    },
    #[error("MalformedPlaceholder: unterminated \"[**\" at line {line}, offset {offset}")]
    MalformedPlaceholder { line: usize, offset: usize },
    #[error("MappingError: line {line}: {message}")]
    Mapping { line: usize, message: String },
    #[error("SchemaError: {path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("IoError: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl NoteError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NoteError::Io {
            path: path.into(),
            source,
        }
    }
}

/// The closed set of PHI categories the pipeline handles.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PhiCategory {
    PatientName,
    Hospital,
    Location,
    Date,
    Id,
}

impl PhiCategory {
    pub const ALL: [PhiCategory; 5] = [
        PhiCategory::PatientName,
        PhiCategory::Hospital,
        PhiCategory::Location,
        PhiCategory::Date,
        PhiCategory::Id,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhiCategory::PatientName => "PATIENT_NAME",
            PhiCategory::Hospital => "HOSPITAL",
            PhiCategory::Location => "LOCATION",
            PhiCategory::Date => "DATE",
            PhiCategory::Id => "ID",
        }
    }
}

impl fmt::Display for PhiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhiCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PhiCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown PHI category {s:?}"))
    }
}

/// Per-token tag: `O` (outside) or a PHI category. The index order is the
/// CRF label order, with `O` first.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    #[default]
    O,
    PatientName,
    Hospital,
    Location,
    Date,
    Id,
}

impl Label {
    pub const ALL: [Label; 6] = [
        Label::O,
        Label::PatientName,
        Label::Hospital,
        Label::Location,
        Label::Date,
        Label::Id,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn category(self) -> Option<PhiCategory> {
        match self {
            Label::O => None,
            Label::PatientName => Some(PhiCategory::PatientName),
            Label::Hospital => Some(PhiCategory::Hospital),
            Label::Location => Some(PhiCategory::Location),
            Label::Date => Some(PhiCategory::Date),
            Label::Id => Some(PhiCategory::Id),
        }
    }

    pub fn as_str(self) -> &'static str {
        self.category().map_or("O", PhiCategory::as_str)
    }
}

impl From<PhiCategory> for Label {
    fn from(category: PhiCategory) -> Self {
        match category {
            PhiCategory::PatientName => Label::PatientName,
            PhiCategory::Hospital => Label::Hospital,
            PhiCategory::Location => Label::Location,
            PhiCategory::Date => Label::Date,
            PhiCategory::Id => Label::Id,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Label::O);
        }
        s.parse::<PhiCategory>().map(Label::from)
    }
}

/// A character-offset PHI span within one line of a note. Offsets count
/// Unicode scalar values, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiSpan {
    #[serde(rename = "line")]
    pub line_index: usize,
    pub begin: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub category: PhiCategory,
    /// Inner text of the placeholder this span came from, when known.
    #[serde(
        rename = "source",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub placeholder: Option<String>,
}

impl PhiSpan {
    pub fn new(line_index: usize, begin: usize, end: usize, category: PhiCategory) -> Self {
        PhiSpan {
            line_index,
            begin,
            end,
            category,
            placeholder: None,
        }
    }
}

/// One clinical document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub note_id: String,
    pub category: String,
    pub lines: Vec<String>,
    #[serde(rename = "phi", default)]
    pub phi_spans: Vec<PhiSpan>,
}

impl Note {
    pub fn new(note_id: impl Into<String>, category: impl Into<String>, lines: Vec<String>) -> Self {
        Note {
            note_id: note_id.into(),
            category: category.into(),
            lines,
            phi_spans: Vec::new(),
        }
    }

    /// Checks the span invariants: `begin < end`, offsets within the line,
    /// sorted by `(line, begin)` and non-overlapping.
    pub fn validate(&self) -> Result<(), String> {
        let mut prev: Option<&PhiSpan> = None;
        for span in &self.phi_spans {
            if span.begin >= span.end {
                return Err(format!(
                    "span {}..{} on line {} is empty or reversed",
                    span.begin, span.end, span.line_index
                ));
            }
            let line = self.lines.get(span.line_index).ok_or_else(|| {
                format!("span refers to missing line {}", span.line_index)
            })?;
            let len = line.chars().count();
            if span.end > len {
                return Err(format!(
                    "span {}..{} exceeds line {} length {len}",
                    span.begin, span.end, span.line_index
                ));
            }
            if let Some(p) = prev {
                if (span.line_index, span.begin) < (p.line_index, p.end) {
                    return Err(format!(
                        "span at line {} offset {} overlaps or precedes the previous span",
                        span.line_index, span.begin
                    ));
                }
            }
            prev = Some(span);
        }
        Ok(())
    }

    /// Text covered by `span`.
    pub fn span_text(&self, span: &PhiSpan) -> String {
        self.lines[span.line_index]
            .chars()
            .skip(span.begin)
            .take(span.end - span.begin)
            .collect()
    }

    pub fn token_count(&self) -> usize {
        self.lines.iter().map(|l| tokenize(l).len()).sum()
    }
}

/// A word or punctuation token with character offsets into its line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub line_index: usize,
    pub begin: usize,
    pub end: usize,
}
