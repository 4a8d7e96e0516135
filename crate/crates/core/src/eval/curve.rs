use std::collections::HashSet;
use std::fmt::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{evaluate, metrics_csv, render_metrics, EvalError, MetricsReport};
use crate::crf::TrainConfig;
use crate::features::{ContextMode, Gazetteer};
use crate::note::PhiCategory;
use crate::rng;
use crate::surrogen::LabeledNote;
use crate::tagger::Tagger;
use crate::Result;

pub const DEFAULT_SIZES: [usize; 4] = [100, 200, 500, 1000];

#[derive(Debug, Clone)]
pub struct CurveOptions {
    pub gazetteer: Gazetteer,
    pub context_mode: ContextMode,
    pub threads: usize,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            gazetteer: Gazetteer::fixtures(),
            context_mode: ContextMode::Positional,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub train_note_ids: Vec<String>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub points: Vec<CurvePoint>,
    /// Stable hash of the test note ids, in order.
    pub test_set_id: String,
    pub seed: u64,
}

impl CurveResult {
    pub fn metrics_csv(&self) -> String {
        metrics_csv(self.points.iter().map(|p| (p.size, &p.metrics)))
    }

    pub fn render(&self) -> String {
        render_metrics(self.points.iter().map(|p| (p.size, &p.metrics)))
    }

    /// `size,category,recall` series.
    pub fn recall_csv(&self) -> String {
        let mut out = String::from("size,category,recall\n");
        for category in PhiCategory::ALL {
            for p in &self.points {
                let _ = writeln!(out, "{},{category},{}", p.size, p.metrics.get(category).recall);
            }
        }
        out
    }
}

/// Trains on nested prefixes of one seeded shuffle of `pool` and scores
/// each model on the fixed `test` set.
pub fn learning_curve(
    pool: &[LabeledNote],
    test: &[LabeledNote],
    sizes: &[usize],
    train_config: &TrainConfig,
    seed: u64,
    options: &CurveOptions,
) -> Result<CurveResult> {
    if sizes.is_empty() {
        return Err(EvalError::InvalidSizes("no training sizes".into()).into());
    }
    if let Some(w) = sizes.windows(2).find(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidSizes(format!("sizes must increase strictly: {} then {}", w[0], w[1])).into());
    }
    if sizes[0] == 0 {
        return Err(EvalError::InvalidSizes("sizes must be positive".into()).into());
    }
    let needed = *sizes.last().expect("non-empty");
    if needed > pool.len() {
        return Err(EvalError::InsufficientPool { needed, available: pool.len() }.into());
    }
    let pool_ids: HashSet<&str> = pool.iter().map(|n| n.note.note_id.as_str()).collect();
    if let Some(n) = test.iter().find(|n| pool_ids.contains(n.note.note_id.as_str())) {
        return Err(EvalError::Overlap(n.note.note_id.clone()).into());
    }

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    let test_notes: Vec<_> = test.iter().map(|n| n.note.clone()).collect();
    let test_ids: Vec<&str> = test.iter().map(|n| n.note.note_id.as_str()).collect();
    let test_set_id = format!("{:016x}", rng::stable_hash(&test_ids.join("\n")));

    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let train: Vec<LabeledNote> = order[..size].iter().map(|&i| pool[i].clone()).collect();
        let config = TrainConfig { threads: options.threads, ..train_config.clone() };
        let tagger = Tagger::train(&train, options.gazetteer.clone(), options.context_mode, &config)?;
        let predicted = tagger.tag_corpus(&test_notes, options.threads)?;
        let metrics = evaluate(test, &predicted)?;
        points.push(CurvePoint {
            size,
            train_note_ids: train.into_iter().map(|n| n.note.note_id).collect(),
            metrics,
        });
    }
    Ok(CurveResult { points, test_set_id, seed })
}
