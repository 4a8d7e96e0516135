//! Versioned JSON model files. Floats are written in shortest round-trip
//! form and parsed exactly, so a reloaded model decodes bit-identically.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CrfError, CrfModel, LabelSet, TrainingMeta};
use crate::features::{ContextMode, FeatureTable};

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    #[serde(default)]
    context_mode: ContextMode,
    #[serde(flatten)]
    training: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    labels: LabelSet,
    features: Vec<String>,
    emission: Vec<Vec<f64>>,
    transition: Vec<Vec<f64>>,
    meta: Meta,
}

fn to_doc(model: &CrfModel) -> ModelDoc {
    let l = model.num_labels();
    let (emission, transition) = model.weights.split_at(model.num_features() * l);
    ModelDoc {
        version: MODEL_VERSION,
        labels: model.labels.clone(),
        features: model.features.names().to_vec(),
        emission: emission.chunks(l.max(1)).map(<[f64]>::to_vec).collect(),
        transition: transition.chunks(l.max(1)).map(<[f64]>::to_vec).collect(),
        meta: Meta {
            context_mode: model.features.mode(),
            training: model.meta.clone(),
        },
    }
}

pub fn model_to_string(model: &CrfModel) -> String {
    serde_json::to_string(&to_doc(model)).expect("model documents always serialize")
}

pub fn model_from_str(text: &str) -> Result<CrfModel, CrfError> {
    let corrupt = |m: String| CrfError::CorruptModel(m);
    let value: Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let version = value
        .get("version")
        .ok_or_else(|| corrupt("missing version".into()))?;
    let found = match version {
        Value::Number(n) => n.as_u64().filter(|&v| v == u64::from(MODEL_VERSION)),
        Value::String(s) => s.trim().parse::<u64>().ok().filter(|&v| v == u64::from(MODEL_VERSION)),
        _ => return Err(corrupt(format!("version must be a number, got {version}"))),
    };
    if found.is_none() {
        let shown = match version {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        return Err(CrfError::VersionMismatch {
            found: shown,
            expected: MODEL_VERSION,
        });
    }
    let mut value = value;
    value["version"] = Value::from(MODEL_VERSION);
    let doc: ModelDoc = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;

    let l = doc.labels.len();
    if l == 0 {
        return Err(corrupt("empty label set".into()));
    }
    if doc.emission.len() != doc.features.len() {
        return Err(corrupt(format!(
            "{} emission rows for {} features",
            doc.emission.len(),
            doc.features.len()
        )));
    }
    if doc.transition.len() != l {
        return Err(corrupt(format!("{} transition rows for {l} labels", doc.transition.len())));
    }
    if let Some(row) = doc.emission.iter().chain(&doc.transition).find(|r| r.len() != l) {
        return Err(corrupt(format!("weight row of width {} for {l} labels", row.len())));
    }
    let names = doc.features.len();
    let table = FeatureTable::from_names(doc.features, doc.meta.context_mode);
    if table.len() != names {
        return Err(corrupt("duplicate feature names".into()));
    }
    let weights = doc.emission.into_iter().chain(doc.transition).flatten().collect();
    let mut model = CrfModel::from_weights(doc.labels, table, weights)?;
    model.meta = doc.meta.training;
    Ok(model)
}

pub fn save_model(model: &CrfModel, path: impl AsRef<Path>) -> Result<(), CrfError> {
    let path = path.as_ref();
    fs::write(path, model_to_string(model)).map_err(|source| CrfError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CrfModel, CrfError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CrfError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_str(&text)
}
