//! Repeat scores: how likely each content word of an utterance is to be
//! repeated by the listener.
//!
//! Raw scores come from an [`EmpiricalScorer`] (per-word repeat rates) or a
//! [`NeuralScorer`] (contextual encoder with span pooling and a sigmoid
//! head). [`score_utterance`] min-max scales them over the utterance's
//! content words and copies each word's score onto its subwords.

mod empirical;
mod labels;
mod map;
mod neural;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use empirical::EmpiricalScorer;
pub use labels::{label_against, label_content_words};
pub use map::{RepeatScoreMap, SubwordScore, WordScore};
pub use neural::{NeuralScorer, NeuralScorerConfig, SpanPooling};

use crate::corpus::{DialogueRecord, Token, TrainingView};
use crate::util::write_atomic;
use crate::vocab::SubwordVocab;
use crate::{Error, Result};

pub const SCORER_FORMAT: &str = "repgen-scorer";
pub const SCORER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingScope {
    /// Min-max over the content words of each utterance.
    #[default]
    Utterance,
    /// Min-max over the raw range seen in training, clamped to `[0, 1]`.
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum ScorerVariant {
    Empirical(EmpiricalScorer),
    Neural(Box<NeuralScorer>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    pub format: String,
    pub version: u32,
    pub scaling: ScalingScope,
    #[serde(flatten)]
    pub variant: ScorerVariant,
}

impl ScorerModel {
    fn wrap(variant: ScorerVariant) -> Self {
        ScorerModel {
            format: SCORER_FORMAT.to_string(),
            version: SCORER_VERSION,
            scaling: ScalingScope::Utterance,
            variant,
        }
    }

    pub fn with_scaling(mut self, scaling: ScalingScope) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn variant_name(&self) -> &'static str {
        match self.variant {
            ScorerVariant::Empirical(_) => "empirical",
            ScorerVariant::Neural(_) => "neural",
        }
    }

    /// Unscaled scores, one per content word in utterance order.
    pub fn raw_scores(&self, utterance: &[Token]) -> Vec<f64> {
        match &self.variant {
            ScorerVariant::Empirical(e) => utterance
                .iter()
                .filter(|t| t.is_content)
                .map(|t| e.raw(t))
                .collect(),
            ScorerVariant::Neural(n) => n.raw_scores(utterance),
        }
    }

    fn corpus_range(&self) -> (f64, f64) {
        match &self.variant {
            ScorerVariant::Empirical(e) => e.range(),
            ScorerVariant::Neural(n) => n.train_range,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_vec(self)?;
        write_atomic(path.as_ref(), &json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let model: ScorerModel = serde_json::from_slice(&bytes)?;
        if model.format != SCORER_FORMAT {
            return Err(Error::Invalid(format!(
                "{} is not a scorer model (format `{}`)",
                path.display(),
                model.format
            )));
        }
        if model.version != SCORER_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported scorer version {}",
                model.version
            )));
        }
        Ok(model)
    }
}

pub fn train_empirical(view: &TrainingView) -> Result<ScorerModel> {
    if view.is_empty() {
        return Err(Error::Invalid("training view is empty".into()));
    }
    Ok(ScorerModel::wrap(ScorerVariant::Empirical(EmpiricalScorer::train(view))))
}

/// Returns the model and the per-epoch mean training loss.
pub fn train_neural(view: &TrainingView, config: NeuralScorerConfig) -> Result<(ScorerModel, Vec<f64>)> {
    if view.is_empty() {
        return Err(Error::Invalid("training view is empty".into()));
    }
    let (model, history) = NeuralScorer::train(view, config)?;
    Ok((ScorerModel::wrap(ScorerVariant::Neural(Box::new(model))), history))
}

/// Min-max scaling; a degenerate range maps everything to 1.
pub fn min_max_scale(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if raw.len() < 2 || hi <= lo {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Scores the content words of `utterance` and spreads each word's score
/// over its subwords under `vocab`.
pub fn score_utterance(
    model: &ScorerModel,
    utterance: &[Token],
    vocab: &SubwordVocab,
) -> Result<RepeatScoreMap> {
    let raw = model.raw_scores(utterance);
    if raw.is_empty() {
        return Err(Error::NoScorableWords);
    }
    let scaled = match model.scaling {
        ScalingScope::Utterance => min_max_scale(&raw),
        ScalingScope::Corpus => {
            let (lo, hi) = model.corpus_range();
            if hi <= lo {
                vec![1.0; raw.len()]
            } else {
                raw.iter()
                    .map(|x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
                    .collect()
            }
        }
    };
    let surfaces: Vec<&str> = utterance.iter().map(|t| t.surface.as_str()).collect();
    let (ids, spans) = vocab.encode_words(&surfaces);
    let mut map = RepeatScoreMap::default();
    let mut scores = scaled.into_iter();
    for (i, (tok, span)) in utterance.iter().zip(spans).enumerate() {
        if !tok.is_content {
            continue;
        }
        let score = scores.next().expect("one raw score per content word");
        map.word_scores.push(WordScore {
            start: i,
            end: i + 1,
            score,
        });
        for position in span {
            map.subword_scores.push(SubwordScore {
                position,
                id: ids[position],
                score,
            });
        }
    }
    Ok(map)
}

/// Mean raw score of each content-word surface over its occurrences in
/// `records`.
pub fn mean_raw_by_word(model: &ScorerModel, records: &[DialogueRecord]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in records {
        let raw = model.raw_scores(&r.utterance);
        for ((_, tok), s) in r.content_words().zip(raw) {
            let e = acc.entry(tok.surface.clone()).or_default();
            e.0 += s;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(w, (s, n))| (w, s / n as f64))
        .collect()
}
