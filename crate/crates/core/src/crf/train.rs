use serde::{Deserialize, Serialize};

use super::inference::{emissions, marginals_from, score_unchecked};
use super::lbfgs::{self, inf_norm};
use super::{CrfError, CrfModel, LabelSet, TrainingMeta};
use crate::features::{FeatureTable, FeatureVector};
use crate::parallel;

/// One training sequence: per-token features and gold label indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    Objective,
    MaxIterations,
    LineSearch,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Gradient => "gradient",
            StopReason::Objective => "objective",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LineSearch => "line_search",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub l2_lambda: f64,
    pub max_iterations: usize,
    /// Stop when the relative objective change falls below this.
    pub tol_objective: f64,
    /// Stop when the gradient infinity-norm falls below this.
    pub tol_gradient: f64,
    /// Recorded for provenance; training itself is deterministic.
    pub seed: u64,
    pub threads: usize,
    /// L-BFGS memory.
    pub history: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2_lambda: 0.1,
            max_iterations: 200,
            tol_objective: 1e-6,
            tol_gradient: 1e-4,
            seed: 0,
            threads: 1,
            history: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CrfError> {
        let bad = |m: String| Err(CrfError::InvalidConfig(m));
        if !(self.l2_lambda >= 0.0) || !self.l2_lambda.is_finite() {
            return bad(format!("l2_lambda must be >= 0, got {}", self.l2_lambda));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1".into());
        }
        if !(self.tol_objective > 0.0) || !(self.tol_gradient > 0.0) {
            return bad("tolerances must be > 0".into());
        }
        if self.history == 0 {
            return bad("history must be >= 1".into());
        }
        Ok(())
    }
}

/// Sequences per gradient chunk. Chunk boundaries do not depend on the
/// thread count, so the reduction order is the same for any pool size.
const CHUNK: usize = 32;

fn check_sequence(model: &CrfModel, seq: &Sequence) -> Result<(), CrfError> {
    if seq.features.is_empty() && seq.labels.is_empty() {
        return Ok(());
    }
    super::sequence_score(model, &seq.features, &seq.labels).map(|_| ())
}

/// Unregularized log-likelihood of `seqs` added into `grad`.
fn accumulate(model: &CrfModel, seqs: &[Sequence], grad: &mut [f64]) -> f64 {
    let l = model.num_labels();
    let off = model.num_features() * l;
    let mut ll = 0.0;
    for seq in seqs {
        let len = seq.features.len();
        if len == 0 {
            continue;
        }
        let e = emissions(model, &seq.features);
        let m = marginals_from(model, &e, len);
        ll += score_unchecked(model, &seq.features, &seq.labels) - m.log_z;
        for (t, fv) in seq.features.iter().enumerate() {
            let gold = seq.labels[t];
            for &f in fv.indices() {
                let row = &mut grad[f as usize * l..(f as usize + 1) * l];
                for (y, r) in row.iter_mut().enumerate() {
                    *r -= m.node(t, y);
                }
                row[gold] += 1.0;
            }
            if t > 0 {
                let prev = seq.labels[t - 1];
                grad[off + prev * l + gold] += 1.0;
                for a in 0..l {
                    for b in 0..l {
                        grad[off + a * l + b] -= m.edge(t - 1, a, b);
                    }
                }
            }
        }
    }
    ll
}

/// Fixed-shape pairwise sum: neighbours are combined level by level.
fn pairwise_reduce(mut parts: Vec<(f64, Vec<f64>)>) -> (f64, Vec<f64>) {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some((mut va, mut ga)) = it.next() {
            if let Some((vb, gb)) = it.next() {
                va += vb;
                ga.iter_mut().zip(&gb).for_each(|(a, b)| *a += b);
            }
            next.push((va, ga));
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

fn objective(model: &CrfModel, dataset: &[Sequence], l2: f64, threads: usize) -> (f64, Vec<f64>) {
    let n = model.weights.len();
    let chunks: Vec<&[Sequence]> = dataset.chunks(CHUNK).collect();
    let parts = parallel::map(&chunks, threads, |chunk| {
        let mut grad = vec![0.0; n];
        let ll = accumulate(model, chunk, &mut grad);
        Ok::<_, std::convert::Infallible>((ll, grad))
    })
    .unwrap_or_else(|never| match never {});
    let (mut ll, mut grad) = pairwise_reduce(parts);
    if grad.is_empty() {
        grad = vec![0.0; n];
    }
    if l2 > 0.0 {
        let sq: f64 = model.weights.iter().map(|w| w * w).sum();
        ll -= 0.5 * l2 * sq;
        grad.iter_mut().zip(&model.weights).for_each(|(g, w)| *g -= l2 * w);
    }
    (ll, grad)
}

/// Regularized conditional log-likelihood and its gradient with respect to
/// the model weights (emission block, then transitions).
pub fn log_likelihood_and_gradient(
    model: &CrfModel,
    dataset: &[Sequence],
    l2_lambda: f64,
) -> Result<(f64, Vec<f64>), CrfError> {
    if dataset.is_empty() {
        return Err(CrfError::EmptyDataset);
    }
    for seq in dataset {
        check_sequence(model, seq)?;
    }
    Ok(objective(model, dataset, l2_lambda, 1))
}

/// Maximizes the regularized log-likelihood from zero weights.
pub fn train(
    labels: LabelSet,
    features: FeatureTable,
    dataset: &[Sequence],
    config: &TrainConfig,
) -> Result<CrfModel, CrfError> {
    config.validate()?;
    if !features.is_frozen() {
        return Err(CrfError::UnfrozenTable);
    }
    if dataset.is_empty() {
        return Err(CrfError::EmptyDataset);
    }
    let mut model = CrfModel::zeros(labels, features);
    for seq in dataset {
        check_sequence(&model, seq)?;
    }
    let x0 = model.weights.clone();
    let opts = lbfgs::Options {
        history: config.history,
        max_iterations: config.max_iterations,
        tol_objective: config.tol_objective,
        tol_gradient: config.tol_gradient,
    };
    let threads = config.threads;
    let mut probe = model.clone();
    let outcome = lbfgs::minimize(
        |w| {
            probe.weights.copy_from_slice(w);
            let (ll, grad) = objective(&probe, dataset, config.l2_lambda, threads);
            Ok((-ll, grad.into_iter().map(|g| -g).collect()))
        },
        x0,
        &opts,
    )?;
    model.weights = outcome.x;
    model.meta = TrainingMeta {
        l2_lambda: config.l2_lambda,
        iterations: outcome.iterations,
        final_objective: -outcome.value,
        gradient_norm: inf_norm(&outcome.gradient),
        stop_reason: Some(outcome.reason),
        objective_trace: outcome.trace.into_iter().map(|v| -v).collect(),
    };
    Ok(model)
}
