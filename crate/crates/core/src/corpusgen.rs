//! Generator of placeholder-bearing template notes.
//!
//! Each note is a sequence of template lines. A line carries a placeholder
//! with probability `q`, chosen so that the expected number of placeholders
//! per 100 tokens equals the configured density; the placeholder category is
//! drawn from the category mix and the template from those with a matching
//! slot.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixtures;
use crate::note::{tokenize, Note, PhiCategory};
use crate::rng::{self, StreamRng};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("TemplateError: line {line}: {message}")]
    Template { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Part {
    Text(String),
    Choice(Vec<String>),
    Slot,
}

/// One sentence skeleton with at most one PHI slot.
///
/// Besides slot markers, a skeleton may contain choice groups `{a|b|c}`
/// (options may be empty) and word-class references `{@class}` defined
/// elsewhere in the bank by a line `@class = a | b | c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    parts: Vec<Part>,
    pub slot: Option<PhiCategory>,
    /// Expected tokens in a realized line, counting the placeholder as one.
    pub mean_tokens: f64,
}

fn choice_tokens(options: &[String]) -> f64 {
    options.iter().map(|o| tokenize(o).len() as f64).sum::<f64>() / options.len() as f64
}

impl Template {
    fn render<R: Rng + ?Sized>(&self, placeholder: &str, rng: &mut R) -> String {
        let mut out = String::new();
        for part in &self.parts {
            match part {
                Part::Text(t) => out.push_str(t),
                Part::Choice(options) => out.push_str(&options[rng.random_range(0..options.len())]),
                Part::Slot => {
                    out.push_str("[**");
                    out.push_str(placeholder);
                    out.push_str("**]");
                }
            }
        }
        // empty options can leave doubled spaces
        out.split(' ').filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone)]
pub struct TemplateBank {
    templates: Vec<Template>,
}

const SLOTS: [(&str, PhiCategory); 5] = [
    ("NAME", PhiCategory::PatientName),
    ("HOSPITAL", PhiCategory::Hospital),
    ("DATE", PhiCategory::Date),
    ("ID", PhiCategory::Id),
    ("LOCATION", PhiCategory::Location),
];

fn split_options(text: &str) -> Vec<String> {
    text.split('|').map(|o| o.trim().to_string()).collect()
}

impl TemplateBank {
    /// One template per line; blank lines and `#` comments are skipped and
    /// `@class = ...` lines define word classes.
    pub fn parse(text: &str) -> Result<Self, GenError> {
        let mut classes = std::collections::HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(def) = line.strip_prefix('@') {
                let (name, options) = def.split_once('=').ok_or_else(|| GenError::Template {
                    line: i + 1,
                    message: "class definition needs '='".into(),
                })?;
                let options = split_options(options);
                if options.iter().all(String::is_empty) {
                    return Err(GenError::Template { line: i + 1, message: "empty class".into() });
                }
                classes.insert(name.trim().to_string(), options);
            }
        }

        let mut templates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('@') {
                continue;
            }
            let err = |message: String| GenError::Template { line: i + 1, message };
            let mut parts = Vec::new();
            let mut slot = None;
            let mut rest = line;
            while let Some(open) = rest.find('{') {
                if open > 0 {
                    parts.push(Part::Text(rest[..open].to_string()));
                }
                let close = rest[open..]
                    .find('}')
                    .map(|c| open + c)
                    .ok_or_else(|| err("unterminated '{'".into()))?;
                let inner = &rest[open + 1..close];
                if let Some(class) = inner.strip_prefix('@') {
                    let options = classes
                        .get(class)
                        .ok_or_else(|| err(format!("undefined class @{class}")))?;
                    parts.push(Part::Choice(options.clone()));
                } else if inner.contains('|') {
                    parts.push(Part::Choice(split_options(inner)));
                } else if let Some(&(_, category)) = SLOTS.iter().find(|(m, _)| *m == inner) {
                    if slot.is_some() {
                        return Err(err("more than one slot".into()));
                    }
                    slot = Some(category);
                    parts.push(Part::Slot);
                } else {
                    return Err(err(format!("unknown marker {{{inner}}}")));
                }
                rest = &rest[close + 1..];
            }
            if !rest.is_empty() {
                parts.push(Part::Text(rest.to_string()));
            }
            let mean_tokens = parts
                .iter()
                .map(|p| match p {
                    Part::Text(t) => tokenize(t).len() as f64,
                    Part::Choice(options) => choice_tokens(options),
                    Part::Slot => 1.0,
                })
                .sum();
            templates.push(Template { parts, slot, mean_tokens });
        }
        if templates.is_empty() {
            return Err(GenError::Config("template bank is empty".into()));
        }
        Ok(TemplateBank { templates })
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    fn fillers(&self) -> Vec<&Template> {
        self.templates.iter().filter(|t| t.slot.is_none()).collect()
    }

    fn slotted(&self, category: PhiCategory) -> Vec<&Template> {
        self.templates.iter().filter(|t| t.slot == Some(category)).collect()
    }
}

impl Default for TemplateBank {
    fn default() -> Self {
        Self::parse(fixtures::TEMPLATES).expect("bundled template bank is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub note_count: usize,
    pub min_lines: usize,
    pub max_lines: usize,
    /// Expected placeholders per 100 tokens.
    pub density: f64,
    pub category_mix: Vec<(PhiCategory, f64)>,
    pub note_category_mix: Vec<(String, f64)>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            note_count: 100,
            min_lines: 8,
            max_lines: 24,
            // overall PHI rate of the MIMIC-III notes, ~2.56 per 100 tokens
            density: 2.5,
            category_mix: vec![
                (PhiCategory::PatientName, 0.35),
                (PhiCategory::Hospital, 0.25),
                (PhiCategory::Date, 0.2),
                (PhiCategory::Id, 0.1),
                (PhiCategory::Location, 0.1),
            ],
            note_category_mix: vec![
                ("Discharge summary".into(), 0.3),
                ("Nursing".into(), 0.25),
                ("Physician".into(), 0.2),
                ("Radiology".into(), 0.15),
                ("Case Management".into(), 0.1),
            ],
        }
    }
}

fn check_mix<T>(name: &str, mix: &[(T, f64)]) -> Result<(), GenError> {
    if mix.is_empty() {
        return Err(GenError::Config(format!("{name} is empty")));
    }
    if mix.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) {
        return Err(GenError::Config(format!("{name} has a negative or non-finite probability")));
    }
    let sum: f64 = mix.iter().map(|(_, p)| p).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(GenError::Config(format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        check_mix("category mix", &self.category_mix)?;
        check_mix("note category mix", &self.note_category_mix)?;
        if !(self.density > 0.0) || !self.density.is_finite() {
            return Err(GenError::Config(format!("density must be positive, got {}", self.density)));
        }
        if self.min_lines > self.max_lines {
            return Err(GenError::Config(format!(
                "empty line range {}..={}",
                self.min_lines, self.max_lines
            )));
        }
        Ok(())
    }
}

fn draw<'a, T, R: Rng + ?Sized>(mix: &'a [(T, f64)], rng: &mut R) -> &'a T {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (item, p) in mix {
        acc += p;
        if u < acc {
            return item;
        }
    }
    // rounding left u above the final sum
    &mix.iter().rev().find(|(_, p)| *p > 0.0).expect("mix has mass").0
}

fn mean_tokens(templates: &[&Template]) -> f64 {
    templates.iter().map(|t| t.mean_tokens).sum::<f64>() / templates.len() as f64
}

/// MIMIC-style inner text for a placeholder of `category`.
fn placeholder_text<R: Rng + ?Sized>(category: PhiCategory, rng: &mut R) -> String {
    let n: u32 = rng.random_range(1..=60);
    let pick = |rng: &mut R, options: &[&str]| options[rng.random_range(0..options.len())].to_string();
    match category {
        PhiCategory::PatientName => {
            let kind = pick(rng, &[
                "Known lastname",
                "Known firstname",
                "First Name8 (NamePattern2)",
                "Last Name (NamePattern1)",
                "Name (NI)",
            ]);
            format!("{kind} {n}")
        }
        PhiCategory::Hospital => {
            let kind = pick(rng, &["Hospital1", "Hospital", "Hospital3", "Hospital Unit Name"]);
            format!("{kind} {n}")
        }
        PhiCategory::Date => {
            let year: u32 = rng.random_range(2100..=2200);
            let month: u32 = rng.random_range(1..=12);
            let day: u32 = rng.random_range(1..=28);
            if rng.random_bool(0.8) {
                format!("{year}-{month}-{day}")
            } else {
                format!("{month}-{day}")
            }
        }
        PhiCategory::Id => {
            let kind = pick(rng, &["Medical Record Number", "Numeric Identifier", "Telephone/Fax (1)", "Pager number"]);
            format!("{kind} {}", rng.random_range(1..10_000))
        }
        PhiCategory::Location => {
            let kind = pick(rng, &["Location (un)", "State", "Country", "Street Address(1)", "Location"]);
            format!("{kind} {n}")
        }
    }
}

/// Generates `config.note_count` raw notes (placeholder text, no spans)
/// using the bundled template bank.
pub fn generate_corpus(config: &GenConfig) -> Result<Vec<Note>, GenError> {
    generate_corpus_with(config, &TemplateBank::default())
}

pub fn generate_corpus_with(config: &GenConfig, bank: &TemplateBank) -> Result<Vec<Note>, GenError> {
    config.validate()?;
    let fillers = bank.fillers();
    if fillers.is_empty() {
        return Err(GenError::Config("template bank has no slot-free templates".into()));
    }
    let mut slotted_mean = 0.0;
    let mut by_category = Vec::new();
    for &(category, p) in &config.category_mix {
        let slotted = bank.slotted(category);
        if slotted.is_empty() {
            if p > 0.0 {
                return Err(GenError::Config(format!("no template has a {category} slot")));
            }
            by_category.push((category, slotted));
            continue;
        }
        slotted_mean += p * mean_tokens(&slotted);
        by_category.push((category, slotted));
    }
    let filler_mean = mean_tokens(&fillers);
    // q / (q * slotted_mean + (1 - q) * filler_mean) = density / 100
    let d = config.density / 100.0;
    let denom = 1.0 - d * slotted_mean + d * filler_mean;
    let q = d * filler_mean / denom;
    if !(denom > 0.0) || q > 1.0 {
        return Err(GenError::Config(format!(
            "density {} exceeds what the template bank can realize",
            config.density
        )));
    }

    let width = config.note_count.saturating_sub(1).to_string().len().max(5);
    let notes = (0..config.note_count)
        .map(|i| {
            let note_id = format!("note-{i:0width$}");
            let mut rng: StreamRng = rng::stream(config.seed, &note_id);
            let category = draw(&config.note_category_mix, &mut rng).clone();
            let line_count = rng.random_range(config.min_lines..=config.max_lines);
            let lines = (0..line_count)
                .map(|_| {
                    if rng.random_bool(q) {
                        let phi = *draw(&config.category_mix, &mut rng);
                        let templates = &by_category.iter().find(|(c, _)| *c == phi).expect("category present").1;
                        let template = templates[rng.random_range(0..templates.len())];
                        let inner = placeholder_text(phi, &mut rng);
                        template.render(&inner, &mut rng)
                    } else {
                        fillers[rng.random_range(0..fillers.len())].render("", &mut rng)
                    }
                })
                .collect();
            Note::new(note_id, category, lines)
        })
        .collect();
    Ok(notes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::note::{corpus_stats, parse_note, CategoryMapping, Strictness};

    fn config(seed: u64, notes: usize) -> GenConfig {
        GenConfig { seed, note_count: notes, ..GenConfig::default() }
    }

    #[test]
    fn zero_notes() {
        assert!(generate_corpus(&config(1, 0)).unwrap().is_empty());
    }

    #[test]
    fn deterministic() {
        let a = generate_corpus(&config(5, 50)).unwrap();
        let b = generate_corpus(&config(5, 50)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = generate_corpus(&config(6, 50)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn density_and_strict_parsing() {
        let raw = generate_corpus(&config(3, 1000)).unwrap();
        let mapping = CategoryMapping::default();
        let parsed: Vec<_> = raw
            .iter()
            .map(|n| parse_note(n, &mapping, Strictness::Strict).expect("strict parse").note)
            .collect();
        let stats = corpus_stats(&parsed);
        let rate = stats.total.phi_instance_count as f64 / stats.total.token_count as f64;
        assert!((0.020..=0.030).contains(&rate), "rate {rate}");
        // realized density within 20% of configured
        assert!((rate * 100.0 / 2.5 - 1.0).abs() <= 0.2);
    }

    #[test]
    fn category_frequencies_within_three_sigma() {
        let cfg = config(8, 1000);
        let raw = generate_corpus(&cfg).unwrap();
        let mapping = CategoryMapping::default();
        let mut counts = std::collections::HashMap::new();
        let mut total = 0usize;
        for n in &raw {
            for span in parse_note(n, &mapping, Strictness::Strict).unwrap().note.phi_spans {
                *counts.entry(span.category).or_insert(0usize) += 1;
                total += 1;
            }
        }
        for (category, p) in &cfg.category_mix {
            let observed = counts.get(category).copied().unwrap_or(0) as f64;
            let mean = total as f64 * p;
            let sigma = (total as f64 * p * (1.0 - p)).sqrt();
            assert!((observed - mean).abs() <= 3.0 * sigma, "{category}: {observed} vs {mean}±{sigma}");
        }
    }

    #[test]
    fn line_counts_respect_range() {
        let cfg = GenConfig { min_lines: 2, max_lines: 3, ..config(2, 40) };
        for n in generate_corpus(&cfg).unwrap() {
            assert!((2..=3).contains(&n.lines.len()));
        }
    }

    #[test]
    fn choices_and_classes() {
        let bank = TemplateBank::parse("@c = red | dark blue\nA {@c} {big|} dog.").unwrap();
        let t = &bank.templates()[0];
        assert_eq!(t.mean_tokens, 3.0 + 1.5 + 0.5);
        let mut rng = rng::seeded(1);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..200 {
            seen.insert(t.render("", &mut rng));
        }
        let expected: std::collections::HashSet<String> =
            ["A red big dog.", "A red dog.", "A dark blue big dog.", "A dark blue dog."]
                .iter()
                .map(|s| s.to_string())
                .collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = config(1, 10);
        cfg.category_mix[0].1 = 0.5;
        assert!(matches!(generate_corpus(&cfg), Err(GenError::Config(_))));
        let cfg = GenConfig { density: 0.0, ..config(1, 10) };
        assert!(matches!(generate_corpus(&cfg), Err(GenError::Config(_))));
        let cfg = GenConfig { min_lines: 5, max_lines: 4, ..config(1, 10) };
        assert!(matches!(generate_corpus(&cfg), Err(GenError::Config(_))));
        let cfg = GenConfig { density: 60.0, ..config(1, 10) };
        assert!(matches!(generate_corpus(&cfg), Err(GenError::Config(_))));
    }

    #[test]
    fn template_bank_parsing() {
        let bank = TemplateBank::parse("# c\nplain line.\nSeen at {HOSPITAL}.\n").unwrap();
        assert_eq!(bank.templates().len(), 2);
        assert_eq!(bank.templates()[1].mean_tokens, 4.0);
        assert!(matches!(TemplateBank::parse("{NAME} and {NAME}"), Err(GenError::Template { line: 1, .. })));
        assert!(matches!(TemplateBank::parse("x\n{FOO} y"), Err(GenError::Template { line: 2, .. })));
        assert!(matches!(TemplateBank::parse("{@nope} y"), Err(GenError::Template { line: 1, .. })));
        assert!(matches!(TemplateBank::parse("x {a|b"), Err(GenError::Template { line: 1, .. })));
        assert!(TemplateBank::default().templates().len() >= 40);
    }
}
