use std::collections::HashSet;
use std::path::Path;

use rand::Rng;

use super::SurrogateError;
use crate::fixtures;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LexiconKind {
    MaleFirst,
    FemaleFirst,
    Surname,
    Hospital,
    /// Auxiliary city list for LOCATION surrogates.
    City,
}

impl LexiconKind {
    pub fn file_name(self) -> &'static str {
        match self {
            LexiconKind::MaleFirst => "male_first.tsv",
            LexiconKind::FemaleFirst => "female_first.tsv",
            LexiconKind::Surname => "surnames.tsv",
            LexiconKind::Hospital => "hospitals.tsv",
            LexiconKind::City => "cities.tsv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub surface: String,
    pub weight: f64,
}

/// A weighted surrogate vocabulary. Weights are positive, surfaces unique,
/// and input order is preserved.
#[derive(Debug, Clone)]
pub struct Lexicon {
    kind: LexiconKind,
    entries: Vec<LexiconEntry>,
    cumulative: Vec<f64>,
}

impl Lexicon {
    pub fn new(kind: LexiconKind, entries: Vec<LexiconEntry>) -> Result<Self, SurrogateError> {
        if entries.is_empty() {
            return Err(SurrogateError::EmptyLexicon(format!("{kind:?}")));
        }
        let mut seen = HashSet::new();
        let mut cumulative = Vec::with_capacity(entries.len());
        let mut total = 0.0;
        for (i, e) in entries.iter().enumerate() {
            if !e.weight.is_finite() {
                return Err(SurrogateError::MalformedWeight(i + 1, e.weight.to_string()));
            }
            if e.weight <= 0.0 {
                return Err(SurrogateError::NonPositiveWeight(i + 1));
            }
            if !seen.insert(e.surface.as_str()) {
                return Err(SurrogateError::DuplicateSurface(i + 1));
            }
            total += e.weight;
            cumulative.push(total);
        }
        Ok(Lexicon {
            kind,
            entries,
            cumulative,
        })
    }

    /// Parses `surface<TAB>weight` lines; the weight defaults to 1. Errors
    /// report 1-based file line numbers. Blank lines are skipped.
    pub fn parse(text: &str, kind: LexiconKind) -> Result<Self, SurrogateError> {
        let mut entries = Vec::new();
        let mut line_numbers = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (surface, weight) = match line.split_once('\t') {
                Some((s, w)) => {
                    let w = w.trim();
                    let weight = w
                        .parse::<f64>()
                        .map_err(|_| SurrogateError::MalformedWeight(i + 1, w.to_string()))?;
                    (s, weight)
                }
                None => (line, 1.0),
            };
            entries.push(LexiconEntry {
                surface: surface.trim().to_string(),
                weight,
            });
            line_numbers.push(i + 1);
        }
        // map entry indices in errors back to file lines
        Lexicon::new(kind, entries).map_err(|e| match e {
            SurrogateError::NonPositiveWeight(n) => SurrogateError::NonPositiveWeight(line_numbers[n - 1]),
            SurrogateError::DuplicateSurface(n) => SurrogateError::DuplicateSurface(line_numbers[n - 1]),
            SurrogateError::MalformedWeight(n, w) => SurrogateError::MalformedWeight(line_numbers[n - 1], w),
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>, kind: LexiconKind) -> Result<Self, SurrogateError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SurrogateError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, kind)
    }

    pub fn kind(&self) -> LexiconKind {
        self.kind
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        *self.cumulative.last().expect("lexicons are non-empty")
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.entries[index].weight / self.total_weight()
    }

    /// Index drawn with probability `weight / total`.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.total_weight();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.entries.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        &self.entries[self.sample_index(rng)].surface
    }

    /// Draw ignoring weights.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        &self.entries[rng.random_range(0..self.entries.len())].surface
    }
}

/// The lexicons used for surrogate sampling. Any may be absent; categories
/// that need a missing lexicon fail with `MissingLexicon`.
#[derive(Debug, Clone, Default)]
pub struct Lexicons {
    pub male_first: Option<Lexicon>,
    pub female_first: Option<Lexicon>,
    pub surname: Option<Lexicon>,
    pub hospital: Option<Lexicon>,
    pub city: Option<Lexicon>,
}

impl Lexicons {
    /// The bundled surrogate lexicons: the 500 most frequent male and
    /// female first names and 1000 most frequent surnames of the 1990 US
    /// Census, 289 US hospitals plus 40 common abbreviations, and 30 cities.
    pub fn fixtures() -> Self {
        let parse = |text, kind| Some(Lexicon::parse(text, kind).expect("bundled lexicon is valid"));
        Lexicons {
            male_first: parse(fixtures::MALE_FIRST, LexiconKind::MaleFirst),
            female_first: parse(fixtures::FEMALE_FIRST, LexiconKind::FemaleFirst),
            surname: parse(fixtures::SURNAMES, LexiconKind::Surname),
            hospital: parse(fixtures::HOSPITALS, LexiconKind::Hospital),
            city: parse(fixtures::CITIES, LexiconKind::City),
        }
    }

    /// The bundled dictionary lists: the 100 most common entries of each
    /// name lexicon and 50 major hospitals. No cities.
    pub fn gazetteer_fixtures() -> Self {
        let parse = |text, kind| Some(Lexicon::parse(text, kind).expect("bundled gazetteer is valid"));
        Lexicons {
            male_first: parse(fixtures::GAZETTEER_MALE_FIRST, LexiconKind::MaleFirst),
            female_first: parse(fixtures::GAZETTEER_FEMALE_FIRST, LexiconKind::FemaleFirst),
            surname: parse(fixtures::GAZETTEER_SURNAMES, LexiconKind::Surname),
            hospital: parse(fixtures::GAZETTEER_HOSPITALS, LexiconKind::Hospital),
            city: None,
        }
    }

    /// Loads whichever of `male_first.tsv`, `female_first.tsv`,
    /// `surnames.tsv`, `hospitals.tsv` and `cities.tsv` exist in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, SurrogateError> {
        let dir = dir.as_ref();
        let load = |kind: LexiconKind| -> Result<Option<Lexicon>, SurrogateError> {
            let path = dir.join(kind.file_name());
            if path.exists() {
                Lexicon::load(path, kind).map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(Lexicons {
            male_first: load(LexiconKind::MaleFirst)?,
            female_first: load(LexiconKind::FemaleFirst)?,
            surname: load(LexiconKind::Surname)?,
            hospital: load(LexiconKind::Hospital)?,
            city: load(LexiconKind::City)?,
        })
    }

    pub fn get(&self, kind: LexiconKind) -> Option<&Lexicon> {
        match kind {
            LexiconKind::MaleFirst => self.male_first.as_ref(),
            LexiconKind::FemaleFirst => self.female_first.as_ref(),
            LexiconKind::Surname => self.surname.as_ref(),
            LexiconKind::Hospital => self.hospital.as_ref(),
            LexiconKind::City => self.city.as_ref(),
        }
    }
}
