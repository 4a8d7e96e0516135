use std::path::Path;

use regex::{Regex, RegexBuilder};

use super::tokenize::is_word_char;
use super::{Note, NoteError, PhiCategory, PhiSpan};
use crate::fixtures;

const OPEN: &str = "[**";
const CLOSE: &str = "**]";

/// Sentinel text standing in for the `ordinal`-th placeholder of a note.
pub fn sentinel(category: PhiCategory, ordinal: usize) -> String {
    format!("PHI_{}_{ordinal}", category.as_str())
}

#[derive(Debug, Clone)]
pub struct MappingRule {
    pub pattern: Regex,
    pub category: PhiCategory,
}

/// Ordered placeholder classification rules; the first rule whose pattern
/// matches the inner text decides the category.
#[derive(Debug, Clone)]
pub struct CategoryMapping {
    rules: Vec<MappingRule>,
}

impl CategoryMapping {
    /// Parses `PATTERN<TAB>CATEGORY` lines. Blank lines and lines starting
    /// with `#` are ignored; patterns are case-insensitive regexes.
    pub fn parse(text: &str) -> Result<Self, NoteError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (pattern, category) = line.split_once('\t').ok_or_else(|| NoteError::Mapping {
                line: line_no,
                message: "expected PATTERN<TAB>CATEGORY".into(),
            })?;
            let category = category
                .trim()
                .parse::<PhiCategory>()
                .map_err(|message| NoteError::Mapping { line: line_no, message })?;
            let pattern = RegexBuilder::new(pattern)
                .case_insensitive(true)
                .build()
                .map_err(|e| NoteError::Mapping {
                    line: line_no,
                    message: e.to_string(),
                })?;
            rules.push(MappingRule { pattern, category });
        }
        Ok(CategoryMapping { rules })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NoteError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| NoteError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn rules(&self) -> &[MappingRule] {
        &self.rules
    }

    pub fn classify(&self, inner: &str) -> Option<PhiCategory> {
        self.rules
            .iter()
            .find(|r| r.pattern.is_match(inner))
            .map(|r| r.category)
    }
}

impl Default for CategoryMapping {
    fn default() -> Self {
        Self::parse(fixtures::CATEGORY_MAPPING).expect("bundled category mapping is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Unmapped placeholders are errors.
    #[default]
    Strict,
    /// Unmapped placeholders become `ID` and produce a warning.
    Lenient,
}

/// An unmapped placeholder that lenient parsing classified as `ID`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub note_id: String,
    pub line: usize,
    pub offset: usize,
    pub inner: String,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub note: Note,
    pub warnings: Vec<ParseWarning>,
}

/// Parses placeholder-annotated text into a [`Note`] whose placeholders are
/// replaced by sentinels covered by PHI spans.
///
/// A space is inserted between a sentinel and an adjacent word character so
/// every sentinel tokenizes as exactly one token.
pub fn parse_placeholders(
    note_id: &str,
    category: &str,
    raw_text: &str,
    mapping: &CategoryMapping,
    strictness: Strictness,
) -> Result<ParseOutcome, NoteError> {
    let lines: Vec<&str> = raw_text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    parse_lines(note_id, category, &lines, mapping, strictness)
}

/// [`parse_placeholders`] over a note whose lines still carry raw markers.
/// Existing spans on `raw` are discarded.
pub fn parse_note(
    raw: &Note,
    mapping: &CategoryMapping,
    strictness: Strictness,
) -> Result<ParseOutcome, NoteError> {
    let lines: Vec<&str> = raw.lines.iter().map(String::as_str).collect();
    parse_lines(&raw.note_id, &raw.category, &lines, mapping, strictness)
}

fn parse_lines(
    note_id: &str,
    category: &str,
    lines: &[&str],
    mapping: &CategoryMapping,
    strictness: Strictness,
) -> Result<ParseOutcome, NoteError> {
    let mut note = Note::new(note_id, category, Vec::with_capacity(lines.len()));
    let mut warnings = Vec::new();
    let mut ordinal = 0;

    for (line_index, line) in lines.iter().enumerate() {
        let mut out = String::with_capacity(line.len());
        let mut out_chars = 0;
        let mut rest: &str = line;
        // characters of the raw line consumed before `rest`
        let mut raw_chars = 0;

        while let Some(start) = rest.find(OPEN) {
            let offset = raw_chars + rest[..start].chars().count();
            let after = &rest[start + OPEN.len()..];
            let close = after
                .find(CLOSE)
                .ok_or(NoteError::MalformedPlaceholder { line: line_index, offset })?;
            let inner = &after[..close];
            if inner.contains(OPEN) {
                return Err(NoteError::MalformedPlaceholder { line: line_index, offset });
            }

            let phi_category = match mapping.classify(inner) {
                Some(c) => c,
                None if strictness == Strictness::Lenient => {
                    warnings.push(ParseWarning {
                        note_id: note_id.to_string(),
                        line: line_index,
                        offset,
                        inner: inner.to_string(),
                    });
                    PhiCategory::Id
                }
                None => {
                    return Err(NoteError::UnmappedPlaceholder {
                        inner: inner.to_string(),
                        line: line_index,
                        offset,
                    })
                }
            };

            let before = &rest[..start];
            out.push_str(before);
            out_chars += before.chars().count();
            if out.chars().next_back().is_some_and(is_word_char) {
                out.push(' ');
                out_chars += 1;
            }
            let text = sentinel(phi_category, ordinal);
            let begin = out_chars;
            out.push_str(&text);
            out_chars += text.chars().count();
            note.phi_spans.push(PhiSpan {
                line_index,
                begin,
                end: out_chars,
                category: phi_category,
                placeholder: Some(inner.to_string()),
            });
            ordinal += 1;

            let consumed = start + OPEN.len() + close + CLOSE.len();
            raw_chars += rest[..consumed].chars().count();
            rest = &rest[consumed..];
            if rest.chars().next().is_some_and(is_word_char) {
                out.push(' ');
                out_chars += 1;
            }
        }
        out.push_str(rest);
        note.lines.push(out);
    }

    Ok(ParseOutcome { note, warnings })
}
