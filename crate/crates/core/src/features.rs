//! Per-token CRF features: training-vocabulary indicators, three words of
//! left and right context read across line breaks, and four dictionary
//! membership flags.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::note::{tokenize, tokenize_line, Note, Token};
use crate::surrogen::{LexiconKind, Lexicons};

/// Context surface for positions before the start or past the end of a
/// note. Contains no word character, so no token can equal it.
pub const PAD: &str = "<PAD>";

pub const WINDOW: usize = 3;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("FrozenTableViolation: training-mode extraction on a frozen feature table")]
    FrozenTableViolation,
    #[error("UnknownContextMode: {0:?}")]
    UnknownContextMode(String),
}

/// Distinct training token surfaces, case-sensitive, indexed by first
/// occurrence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn insert(&mut self, surface: &str) -> usize {
        if let Some(&i) = self.index.get(surface) {
            return i;
        }
        let i = self.surfaces.len();
        self.surfaces.push(surface.to_string());
        self.index.insert(surface.to_string(), i);
        i
    }

    pub fn get(&self, surface: &str) -> Option<usize> {
        self.index.get(surface).copied()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.index.contains_key(surface)
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }
}

pub fn build_vocab<'a>(notes: impl IntoIterator<Item = &'a Note>) -> Vocabulary {
    let mut vocab = Vocabulary::default();
    for note in notes {
        for line in &note.lines {
            for token in tokenize(line) {
                vocab.insert(&token.text);
            }
        }
    }
    vocab
}

/// All tokens of a note in line order, so context crosses line breaks.
pub fn token_stream(note: &Note) -> Vec<Token> {
    note.lines
        .iter()
        .enumerate()
        .flat_map(|(i, line)| tokenize_line(line, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow<'a> {
    /// `w[i-1], w[i-2], w[i-3]`
    pub prev: [&'a str; WINDOW],
    /// `w[i+1], w[i+2], w[i+3]`
    pub next: [&'a str; WINDOW],
}

pub fn context_window<'a, S: AsRef<str>>(stream: &'a [S], i: usize) -> ContextWindow<'a> {
    let at = |j: Option<usize>| match j {
        Some(j) if j < stream.len() => stream[j].as_ref(),
        _ => PAD,
    };
    ContextWindow {
        prev: std::array::from_fn(|k| at(i.checked_sub(k + 1))),
        next: std::array::from_fn(|k| at(i.checked_add(k + 1))),
    }
}

/// Lower-cased membership sets for the four dictionary flags. The hospital
/// set holds the individual words of the hospital names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    pub male: HashSet<String>,
    pub female: HashSet<String>,
    pub surname: HashSet<String>,
    pub hospital: HashSet<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DictFlags {
    pub male: bool,
    pub female: bool,
    pub surname: bool,
    pub hospital: bool,
}

impl Gazetteer {
    pub fn from_lexicons(lexicons: &Lexicons) -> Self {
        let surfaces = |kind| -> HashSet<String> {
            lexicons
                .get(kind)
                .map(|l| l.entries().iter().map(|e| e.surface.to_lowercase()).collect())
                .unwrap_or_default()
        };
        let hospital = lexicons
            .get(LexiconKind::Hospital)
            .map(|l| {
                l.entries()
                    .iter()
                    .flat_map(|e| tokenize(&e.surface))
                    .filter(|t| t.text.chars().any(crate::note::is_word_char))
                    .map(|t| t.text.to_lowercase())
                    .collect()
            })
            .unwrap_or_default();
        Gazetteer {
            male: surfaces(LexiconKind::MaleFirst),
            female: surfaces(LexiconKind::FemaleFirst),
            surname: surfaces(LexiconKind::Surname),
            hospital,
        }
    }

    /// Built from the bundled common-name and major-hospital lists, which
    /// are a subset of the surrogate lexicons.
    pub fn fixtures() -> Self {
        Self::from_lexicons(&Lexicons::gazetteer_fixtures())
    }

    pub fn flags(&self, word: &str) -> DictFlags {
        let w = word.to_lowercase();
        DictFlags {
            male: self.male.contains(&w),
            female: self.female.contains(&w),
            surname: self.surname.contains(&w),
            hospital: self.hospital.contains(&w),
        }
    }
}

/// Whether context features record their offset (`PREV2:w`) or only their
/// side (`PREV:w`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    #[default]
    Positional,
    Merged,
}

impl ContextMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ContextMode::Positional => "positional",
            ContextMode::Merged => "merged",
        }
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextMode {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positional" => Ok(ContextMode::Positional),
            "merged" | "merged-context" => Ok(ContextMode::Merged),
            _ => Err(FeatureError::UnknownContextMode(s.to_string())),
        }
    }
}

/// Active binary features of one token, strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureVector(Vec<u32>);

impl FeatureVector {
    /// Sorts and deduplicates `indices`.
    pub fn new(mut indices: Vec<u32>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        FeatureVector(indices)
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Feature name to index mapping. Grows during training extraction until
/// frozen; afterwards unseen names are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureTable {
    names: Vec<String>,
    index: HashMap<String, u32>,
    frozen: bool,
    mode: ContextMode,
}

impl FeatureTable {
    pub fn new(mode: ContextMode) -> Self {
        FeatureTable {
            mode,
            ..Default::default()
        }
    }

    /// A frozen table over `names`, indexed in order. Duplicate names keep
    /// their first index.
    pub fn from_names(names: Vec<String>, mode: ContextMode) -> Self {
        let mut table = FeatureTable::new(mode);
        for name in names {
            table.intern(name);
        }
        table.frozen = true;
        table
    }

    fn intern(&mut self, name: String) -> u32 {
        if let Some(&i) = self.index.get(&name) {
            return i;
        }
        let i = self.names.len() as u32;
        self.index.insert(name.clone(), i);
        self.names.push(name);
        i
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn mode(&self) -> ContextMode {
        self.mode
    }

    /// Vocabulary implied by the table's `CUR:` features.
    pub fn vocabulary(&self) -> Vocabulary {
        let mut vocab = Vocabulary::default();
        for name in &self.names {
            if let Some(w) = name.strip_prefix("CUR:") {
                vocab.insert(w);
            }
        }
        vocab
    }
}

pub const DICT_MALE: &str = "DICT_MALE";
pub const DICT_FEMALE: &str = "DICT_FEMALE";
pub const DICT_SURNAME: &str = "DICT_SURNAME";
pub const DICT_HOSPITAL: &str = "DICT_HOSPITAL";

/// Feature names active for token `i` of `stream`, before table lookup.
pub fn feature_names<S: AsRef<str>>(
    stream: &[S],
    i: usize,
    vocab: &Vocabulary,
    gazetteer: &Gazetteer,
    mode: ContextMode,
) -> Vec<String> {
    let word = stream[i].as_ref();
    let mut names = Vec::with_capacity(2 * WINDOW + 5);
    if vocab.contains(word) {
        names.push(format!("CUR:{word}"));
    }
    let window = context_window(stream, i);
    for (side, slots) in [("PREV", window.prev), ("NEXT", window.next)] {
        for (k, w) in slots.iter().enumerate() {
            names.push(match mode {
                ContextMode::Positional => format!("{side}{}:{w}", k + 1),
                ContextMode::Merged => format!("{side}:{w}"),
            });
        }
    }
    let flags = gazetteer.flags(word);
    for (on, name) in [
        (flags.male, DICT_MALE),
        (flags.female, DICT_FEMALE),
        (flags.surname, DICT_SURNAME),
        (flags.hospital, DICT_HOSPITAL),
    ] {
        if on {
            names.push(name.to_string());
        }
    }
    names
}

fn surfaces(note: &Note) -> Vec<String> {
    token_stream(note).into_iter().map(|t| t.text).collect()
}

/// Training-mode extraction: features not yet in `table` are added.
pub fn extract_training(
    note: &Note,
    vocab: &Vocabulary,
    gazetteer: &Gazetteer,
    table: &mut FeatureTable,
) -> Result<Vec<FeatureVector>, FeatureError> {
    if table.frozen {
        return Err(FeatureError::FrozenTableViolation);
    }
    let stream = surfaces(note);
    Ok((0..stream.len())
        .map(|i| {
            let names = feature_names(&stream, i, vocab, gazetteer, table.mode);
            FeatureVector::new(names.into_iter().map(|n| table.intern(n)).collect())
        })
        .collect())
}

/// Lookup-only extraction: features missing from `table` are dropped.
pub fn extract(
    note: &Note,
    vocab: &Vocabulary,
    gazetteer: &Gazetteer,
    table: &FeatureTable,
) -> Vec<FeatureVector> {
    let stream = surfaces(note);
    (0..stream.len())
        .map(|i| {
            let names = feature_names(&stream, i, vocab, gazetteer, table.mode);
            FeatureVector::new(names.iter().filter_map(|n| table.get(n)).collect())
        })
        .collect()
}
