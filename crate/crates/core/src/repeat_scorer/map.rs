use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::wls::RepeatWeightVector;
use crate::Result;

/// Score of one content word; `start..end` is its token index range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordScore {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// Score of one subword position of the encoded utterance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubwordScore {
    pub position: usize,
    pub id: u32,
    pub score: f64,
}

/// Scaled repeat scores for one utterance. Only content words appear; every
/// subword of a content word carries that word's score.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepeatScoreMap {
    pub word_scores: Vec<WordScore>,
    pub subword_scores: Vec<SubwordScore>,
}

#[derive(Serialize)]
struct Export {
    word_spans: Vec<(usize, usize, f64)>,
}

impl RepeatScoreMap {
    /// Score per vocabulary id; a subword shared by several content words
    /// keeps the largest score.
    pub fn by_id(&self) -> BTreeMap<u32, f64> {
        let mut m: BTreeMap<u32, f64> = BTreeMap::new();
        for s in &self.subword_scores {
            let e = m.entry(s.id).or_insert(s.score);
            *e = e.max(s.score);
        }
        m
    }

    pub fn score_of(&self, id: u32) -> f64 {
        self.subword_scores
            .iter()
            .filter(|s| s.id == id)
            .map(|s| s.score)
            .fold(0.0, f64::max)
    }

    pub fn weight_vector(&self, k: usize) -> Result<RepeatWeightVector> {
        RepeatWeightVector::from_scores(k, self.by_id())
    }

    /// `{"word_spans": [[start, end, score], ...]}`
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(Export {
            word_spans: self
                .word_scores
                .iter()
                .map(|w| (w.start, w.end, w.score))
                .collect(),
        })
        .expect("score export serializes")
    }
}
