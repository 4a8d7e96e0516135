//! Token-level precision, recall and F1 per PHI category, and the
//! learning-curve harness.

mod curve;

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::note::{Label, PhiCategory};
use crate::surrogen::LabeledNote;

pub use curve::{learning_curve, CurveOptions, CurvePoint, CurveResult, DEFAULT_SIZES};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("AlignmentError: {0}")]
    Alignment(String),
    #[error("InsufficientPool: {needed} training notes requested but the pool has {available}")]
    InsufficientPool { needed: usize, available: usize },
    #[error("OverlapError: note {0:?} is in both the training pool and the test set")]
    Overlap(String),
    #[error("InvalidSizes: {0}")]
    InvalidSizes(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl CategoryMetrics {
    /// Derives the ratios. A ratio with a zero denominator is 1 when there
    /// is nothing to find and nothing was predicted, otherwise 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let vacuous = tp + fp + fn_ == 0;
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                if vacuous { 1.0 } else { 0.0 }
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        CategoryMetrics { tp, fp, fn_, precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub categories: BTreeMap<PhiCategory, CategoryMetrics>,
    /// Computed from summed counts over all categories.
    pub micro: CategoryMetrics,
}

impl MetricsReport {
    pub fn get(&self, category: PhiCategory) -> &CategoryMetrics {
        &self.categories[&category]
    }
}

fn check_alignment(gold: &[LabeledNote], predicted: &[Vec<Label>]) -> Result<(), EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::Alignment(format!(
            "{} gold notes but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    for (g, p) in gold.iter().zip(predicted) {
        if g.token_labels.len() != p.len() {
            return Err(EvalError::Alignment(format!(
                "note {:?}: {} gold tokens but {} predicted labels",
                g.note.note_id,
                g.token_labels.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

fn counts(gold: &[LabeledNote], predicted: &[Vec<Label>], category: PhiCategory) -> (u64, u64, u64) {
    let target = Label::from(category);
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (g, p) in gold.iter().zip(predicted) {
        for (&gl, &pl) in g.token_labels.iter().zip(p) {
            match (gl == target, pl == target) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    (tp, fp, fn_)
}

pub fn token_prf(
    gold: &[LabeledNote],
    predicted: &[Vec<Label>],
    category: PhiCategory,
) -> Result<CategoryMetrics, EvalError> {
    check_alignment(gold, predicted)?;
    let (tp, fp, fn_) = counts(gold, predicted, category);
    Ok(CategoryMetrics::from_counts(tp, fp, fn_))
}

pub fn evaluate(gold: &[LabeledNote], predicted: &[Vec<Label>]) -> Result<MetricsReport, EvalError> {
    check_alignment(gold, predicted)?;
    let mut report = MetricsReport::default();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for category in PhiCategory::ALL {
        let c = counts(gold, predicted, category);
        tp += c.0;
        fp += c.1;
        fn_ += c.2;
        report.categories.insert(category, CategoryMetrics::from_counts(c.0, c.1, c.2));
    }
    report.micro = CategoryMetrics::from_counts(tp, fp, fn_);
    Ok(report)
}

/// `category,size,tp,fp,fn,precision,recall,f1`, one row per category per
/// size, then a `MICRO` row per size.
pub fn metrics_csv<'a>(reports: impl IntoIterator<Item = (usize, &'a MetricsReport)>) -> String {
    let mut out = String::from("category,size,tp,fp,fn,precision,recall,f1\n");
    for (size, report) in reports {
        let rows = report
            .categories
            .iter()
            .map(|(c, m)| (c.as_str(), m))
            .chain(std::iter::once(("MICRO", &report.micro)));
        for (name, m) in rows {
            let _ = writeln!(
                out,
                "{name},{size},{},{},{},{},{},{}",
                m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1
            );
        }
    }
    out
}

/// Text table with precision, recall and F1 to two decimals.
pub fn render_metrics<'a>(reports: impl IntoIterator<Item = (usize, &'a MetricsReport)>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:>6} {:>6} {:>6} {:>6}", "Category", "Size", "P", "R", "F1");
    for (size, report) in reports {
        let rows = report
            .categories
            .iter()
            .map(|(c, m)| (c.as_str(), m))
            .chain(std::iter::once(("MICRO", &report.micro)));
        for (name, m) in rows {
            let _ = writeln!(
                out,
                "{name:<14} {size:>6} {:>6.2} {:>6.2} {:>6.2}",
                m.precision, m.recall, m.f1
            );
        }
    }
    out
}
