//! Linear-chain conditional random field: emission weights per
//! (feature, label), a dense label transition matrix, log-space
//! forward-backward, Viterbi decoding and L2-regularized maximum-likelihood
//! training with L-BFGS.

mod inference;
mod io;
mod lbfgs;
mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureTable;
use crate::note::Label;

pub use inference::{log_partition, marginals, sequence_score, viterbi, Marginals};
pub use io::{load_model, model_from_str, model_to_string, save_model, MODEL_VERSION};
pub use train::{log_likelihood_and_gradient, train, Sequence, StopReason, TrainConfig};

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("LengthMismatch: {features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("IndexOutOfRange: {what} index {index} >= {bound}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("EmptySequence: inference needs at least one token")]
    EmptySequence,
    #[error("EmptyDataset: training needs at least one sequence")]
    EmptyDataset,
    #[error("NonFiniteObjective: objective evaluated to {0}")]
    NonFiniteObjective(f64),
    #[error("UnfrozenTable: the feature table must be frozen before training")]
    UnfrozenTable,
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("VersionMismatch: model version {found} but reader supports {expected}")]
    VersionMismatch { found: String, expected: u32 },
    #[error("CorruptModel: {0}")]
    CorruptModel(String),
    #[error("IoError: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Ordered label names. Index 0 is the tie-break anchor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSet(Vec<String>);

impl LabelSet {
    pub fn new(names: Vec<String>) -> Self {
        LabelSet(names)
    }

    /// `[O, PATIENT_NAME, HOSPITAL, LOCATION, DATE, ID]`
    pub fn phi() -> Self {
        LabelSet(Label::ALL.iter().map(|l| l.as_str().to_string()).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Training record stored with the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub l2_lambda: f64,
    pub iterations: usize,
    pub final_objective: f64,
    pub gradient_norm: f64,
    pub stop_reason: Option<StopReason>,
    /// Objective after each accepted iterate, starting at zero weights.
    #[serde(default)]
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    labels: LabelSet,
    features: FeatureTable,
    /// Emission block (`features × labels`, row-major) then transitions
    /// (`labels × labels`, `from` major).
    weights: Vec<f64>,
    pub meta: TrainingMeta,
}

impl CrfModel {
    /// All-zero weights. The feature table is frozen.
    pub fn zeros(labels: LabelSet, mut features: FeatureTable) -> Self {
        features.freeze();
        let n = features.len() * labels.len() + labels.len() * labels.len();
        CrfModel {
            labels,
            features,
            weights: vec![0.0; n],
            meta: TrainingMeta::default(),
        }
    }

    pub fn from_weights(labels: LabelSet, features: FeatureTable, weights: Vec<f64>) -> Result<Self, CrfError> {
        let mut model = CrfModel::zeros(labels, features);
        if weights.len() != model.weights.len() {
            return Err(CrfError::CorruptModel(format!(
                "{} weights for {} parameters",
                weights.len(),
                model.weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(CrfError::CorruptModel(format!("non-finite weight {w}")));
        }
        model.weights = weights;
        Ok(model)
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn features(&self) -> &FeatureTable {
        &self.features
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn transition_offset(&self) -> usize {
        self.num_features() * self.num_labels()
    }

    pub fn emission(&self, feature: usize, label: usize) -> f64 {
        self.weights[feature * self.num_labels() + label]
    }

    pub fn set_emission(&mut self, feature: usize, label: usize, value: f64) {
        let l = self.num_labels();
        self.weights[feature * l + label] = value;
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.weights[self.transition_offset() + from * self.num_labels() + to]
    }

    pub fn set_transition(&mut self, from: usize, to: usize, value: f64) {
        let i = self.transition_offset() + from * self.num_labels() + to;
        self.weights[i] = value;
    }

    pub(crate) fn transitions(&self) -> &[f64] {
        &self.weights[self.transition_offset()..]
    }
}
