//! A trained de-identification tagger: feature extraction plus CRF decoding.

use crate::crf::{self, CrfError, CrfModel, LabelSet, Sequence, TrainConfig};
use crate::features::{
    build_vocab, extract, extract_training, ContextMode, FeatureTable, FeatureVector, Gazetteer, Vocabulary,
};
use crate::note::{Label, Note};
use crate::parallel;
use crate::surrogen::LabeledNote;
use crate::Result;

#[derive(Debug, Clone)]
pub struct Tagger {
    model: CrfModel,
    vocab: Vocabulary,
    gazetteer: Gazetteer,
    labels: Vec<Label>,
}

impl Tagger {
    /// Builds the vocabulary and feature table from `notes`, then trains.
    pub fn train(
        notes: &[LabeledNote],
        gazetteer: Gazetteer,
        mode: ContextMode,
        config: &TrainConfig,
    ) -> Result<Self> {
        let vocab = build_vocab(notes.iter().map(|n| &n.note));
        let mut table = FeatureTable::new(mode);
        let mut dataset = Vec::with_capacity(notes.len());
        for n in notes {
            let features = extract_training(&n.note, &vocab, &gazetteer, &mut table)?;
            let labels = n.token_labels.iter().map(|l| l.index()).collect();
            dataset.push(Sequence { features, labels });
        }
        table.freeze();
        let model = crf::train(LabelSet::phi(), table, &dataset, config)?;
        Self::from_model(model, gazetteer)
    }

    /// Wraps a loaded model. Its labels must be PHI label names.
    pub fn from_model(model: CrfModel, gazetteer: Gazetteer) -> Result<Self> {
        let labels = model
            .labels()
            .names()
            .iter()
            .map(|name| name.parse::<Label>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(CrfError::CorruptModel)?;
        let vocab = model.features().vocabulary();
        Ok(Tagger {
            model,
            vocab,
            gazetteer,
            labels,
        })
    }

    pub fn model(&self) -> &CrfModel {
        &self.model
    }

    pub fn into_model(self) -> CrfModel {
        self.model
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn features(&self, note: &Note) -> Vec<FeatureVector> {
        extract(note, &self.vocab, &self.gazetteer, self.model.features())
    }

    /// One label per token of `note`.
    pub fn tag_note(&self, note: &Note) -> Result<Vec<Label>> {
        let xs = self.features(note);
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let path = crf::viterbi(&self.model, &xs)?;
        Ok(path.into_iter().map(|y| self.labels[y]).collect())
    }

    pub fn tag_corpus(&self, notes: &[Note], threads: usize) -> Result<Vec<Vec<Label>>> {
        parallel::map(notes, threads, |n| self.tag_note(n))
    }
}
