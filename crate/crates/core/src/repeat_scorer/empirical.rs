use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::labels::label_against;
use crate::corpus::{Token, TrainingView};

/// Corpus-statistics scorer: the fraction of a word's content-word
/// occurrences that were repeated in the selected training reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalScorer {
    pub scores: BTreeMap<String, f64>,
    /// Returned for unseen words: the global mean label rate.
    pub default: f64,
    #[serde(default)]
    pub counts: BTreeMap<String, (u64, u64)>,
}

impl EmpiricalScorer {
    pub fn train(view: &TrainingView) -> Self {
        let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        let (mut pos, mut total) = (0u64, 0u64);
        for (record, reference) in view.iter() {
            for (span, label) in label_against(&record.utterance, &[reference]) {
                let w = &record.utterance[span.start].surface;
                let e = counts.entry(w.clone()).or_default();
                e.0 += u64::from(label);
                e.1 += 1;
                pos += u64::from(label);
                total += 1;
            }
        }
        let scores = counts
            .iter()
            .map(|(w, &(p, n))| (w.clone(), p as f64 / n as f64))
            .collect();
        let default = if total == 0 { 0.0 } else { pos as f64 / total as f64 };
        EmpiricalScorer {
            scores,
            default,
            counts,
        }
    }

    pub fn raw(&self, token: &Token) -> f64 {
        self.scores.get(&token.surface).copied().unwrap_or(self.default)
    }

    pub fn range(&self) -> (f64, f64) {
        self.scores
            .values()
            .chain(std::iter::once(&self.default))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}
