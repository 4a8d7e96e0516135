use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::{tokenize, Note};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub note_count: u64,
    pub notes_with_phi: u64,
    pub token_count: u64,
    pub phi_instance_count: u64,
}

impl CategoryCounts {
    fn add(&mut self, other: &CategoryCounts) {
        self.note_count += other.note_count;
        self.notes_with_phi += other.notes_with_phi;
        self.token_count += other.token_count;
        self.phi_instance_count += other.phi_instance_count;
    }

    /// `"954 (98.65%)"`
    pub fn notes_with_phi_cell(&self) -> String {
        format!(
            "{} ({}%)",
            self.notes_with_phi,
            coverage_percent(self.notes_with_phi, self.note_count)
        )
    }

    /// `"9860 (7.48%)"`
    pub fn phi_instances_cell(&self) -> String {
        format!(
            "{} ({}%)",
            self.phi_instance_count,
            rate_percent(self.phi_instance_count, self.token_count)
        )
    }
}

/// Per note-category PHI distribution with a totals row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub rows: BTreeMap<String, CategoryCounts>,
    pub total: CategoryCounts,
}

pub fn corpus_stats(notes: &[Note]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for note in notes {
        let counts = CategoryCounts {
            note_count: 1,
            notes_with_phi: u64::from(!note.phi_spans.is_empty()),
            token_count: note.lines.iter().map(|l| tokenize(l).len() as u64).sum(),
            phi_instance_count: note.phi_spans.len() as u64,
        };
        stats.rows.entry(note.category.clone()).or_default().add(&counts);
        stats.total.add(&counts);
    }
    stats
}

/// Share of notes containing PHI, truncated to two decimals so a category
/// with any PHI-free note never renders as `100.00`.
pub fn coverage_percent(part: u64, whole: u64) -> String {
    if whole == 0 {
        return "0.00".into();
    }
    let hundredths = u128::from(part) * 10_000 / u128::from(whole);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// PHI tokens per token, rounded half-up to two decimals.
pub fn rate_percent(part: u64, whole: u64) -> String {
    if whole == 0 {
        return "0.00".into();
    }
    let whole = u128::from(whole);
    let hundredths = (u128::from(part) * 20_000 + whole) / (2 * whole);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

impl CorpusStats {
    /// Fixed-width text table: category, notes, notes containing PHI,
    /// tokens, PHI instances.
    pub fn render(&self) -> String {
        let mut rows: Vec<(String, &CategoryCounts)> =
            self.rows.iter().map(|(k, v)| (k.clone(), v)).collect();
        rows.push(("Total".into(), &self.total));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0).max(8);

        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>width$} | {:>9} | {:>18} | {:>11} | {:>20}",
            "Category", "Notes", "Contain PHI", "Tokens", "PHI Instances"
        );
        let _ = writeln!(out, "{}", "-".repeat(width + 72));
        for (i, (name, c)) in rows.iter().enumerate() {
            if i + 1 == rows.len() {
                let _ = writeln!(out, "{}", "-".repeat(width + 72));
            }
            let _ = writeln!(
                out,
                "{:>width$} | {:>9} | {:>18} | {:>11} | {:>20}",
                name,
                c.note_count,
                c.notes_with_phi_cell(),
                c.token_count,
                c.phi_instances_cell()
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("category,notes,notes_with_phi,notes_with_phi_pct,tokens,phi_instances,phi_pct\n");
        let rows = self.rows.iter().map(|(k, v)| (k.as_str(), v));
        for (name, c) in rows.chain(std::iter::once(("Total", &self.total))) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(name),
                c.note_count,
                c.notes_with_phi,
                coverage_percent(c.notes_with_phi, c.note_count),
                c.token_count,
                c.phi_instance_count,
                rate_percent(c.phi_instance_count, c.token_count)
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
