//! Beam search with repetition-aware rescoring of finished hypotheses.
//!
//! `s(Y, X) = log P(Y|X) / lp(Y) + cp(Y, X) + rs(Y, X)`

mod search;
mod terms;

pub use search::{beam_search, brute_force_best, rank_hypotheses, rsm_score, TIE_TOLERANCE};
pub use terms::{clipped_coverage_penalty, coverage_penalty, length_penalty, repeat_term, Coverage, ScoreTerms};

use serde::{Deserialize, Serialize};

use crate::corpus::DialogueRecord;
use crate::repeat_scorer::{score_utterance, RepeatScoreMap, ScorerModel};
use crate::seq2seq::GenerativeModel;
use crate::vocab::SubwordVocab;
use crate::{Error, Result};

/// Which rescoring terms are active. A disabled term contributes its
/// neutral element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub lp: bool,
    pub cp: bool,
    pub rs: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation {
            lp: true,
            cp: true,
            rs: true,
        }
    }
}

impl Ablation {
    pub const NONE: Ablation = Ablation {
        lp: false,
        cp: false,
        rs: false,
    };

    /// Parses names such as `rsm`, `w/o-rs`, `no-cp`, `none`.
    pub fn from_name(name: &str) -> Option<Self> {
        let all = Ablation::default();
        match name.to_ascii_lowercase().as_str() {
            "rsm" | "full" | "all" => Some(all),
            "none" | "beam" => Some(Ablation::NONE),
            "w/o-lp" | "wo-lp" | "no-lp" => Some(Ablation { lp: false, ..all }),
            "w/o-cp" | "wo-cp" | "no-cp" => Some(Ablation { cp: false, ..all }),
            "w/o-rs" | "wo-rs" | "no-rs" => Some(Ablation { rs: false, ..all }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsmParams {
    pub alpha: f64,
    pub beta: f64,
    pub beam_size: usize,
    /// Upper bound on response length; `None` means `2 * |X| + 5`.
    pub max_length: Option<usize>,
    pub ablation: Ablation,
    pub rs_floor: f64,
    /// Rank partial hypotheses by the rescoring function instead of the
    /// cumulative log-probability.
    pub per_step: bool,
}

impl Default for RsmParams {
    fn default() -> Self {
        RsmParams {
            alpha: 0.2,
            beta: 0.2,
            beam_size: 5,
            max_length: None,
            ablation: Ablation::default(),
            rs_floor: 1e-6,
            per_step: false,
        }
    }
}

impl RsmParams {
    pub fn check(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::Param("beam_size must be >= 1".into()));
        }
        if self.max_length == Some(0) {
            return Err(Error::Param("max_length must be >= 1".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::Param(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !self.beta.is_finite() {
            return Err(Error::Param(format!("beta must be finite, got {}", self.beta)));
        }
        if self.rs_floor.is_nan() || self.rs_floor <= 0.0 {
            return Err(Error::Param(format!("rs_floor must be > 0, got {}", self.rs_floor)));
        }
        Ok(())
    }

    /// Effective maximum length for a source of `source_len` subwords.
    pub fn max_length_for(&self, source_len: usize, model_max: usize) -> usize {
        self.max_length
            .unwrap_or(2 * source_len + 5)
            .min(model_max)
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    /// One attention row per generated token; empty when the model
    /// exposes no attention.
    pub attention: Vec<Vec<f64>>,
    pub finished: bool,
    pub final_score: Option<f64>,
    pub terms: Option<ScoreTerms>,
    /// Some source position received zero total attention.
    pub coverage_floored: bool,
}

impl Hypothesis {
    pub fn empty() -> Self {
        Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
            attention: Vec::new(),
            finished: false,
            final_score: None,
            terms: None,
            coverage_floored: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamEntry {
    pub output: String,
    pub score: f64,
}

/// One line of generation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub dialogue_id: String,
    pub output: String,
    pub score: f64,
    pub terms: ScoreTerms,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub coverage_floored: bool,
    pub beam: Vec<BeamEntry>,
}

/// Decodes a response for `record` with `model`. Without a scorer the
/// repetition term sees an empty score map.
pub fn generate_for_record(
    model: &dyn GenerativeModel,
    scorer: Option<&ScorerModel>,
    record: &DialogueRecord,
    params: &RsmParams,
) -> Result<GenerationRecord> {
    let vocab: &SubwordVocab = model
        .vocab()
        .ok_or_else(|| Error::Invalid("model exposes no vocabulary".into()))?;
    let surfaces: Vec<&str> = record.utterance.iter().map(|t| t.surface.as_str()).collect();
    let (mut source, _) = vocab.encode_words(&surfaces);
    source.truncate(model.max_source_len());
    let map = match scorer {
        Some(s) if params.ablation.rs => match score_utterance(s, &record.utterance, vocab) {
            Ok(m) => m,
            Err(Error::NoScorableWords) => RepeatScoreMap::default(),
            Err(e) => return Err(e),
        },
        _ => RepeatScoreMap::default(),
    };
    let ranked = beam_search(model, &source, &map, params)?;
    let best = ranked
        .first()
        .ok_or_else(|| Error::Invalid(format!("{}: beam search produced no hypothesis", record.dialogue_id)))?;
    Ok(GenerationRecord {
        dialogue_id: record.dialogue_id.clone(),
        output: vocab.decode(&best.tokens),
        score: best.final_score.unwrap_or(f64::NEG_INFINITY),
        terms: best.terms.expect("ranked hypotheses are scored"),
        coverage_floored: best.coverage_floored,
        beam: ranked
            .iter()
            .skip(1)
            .map(|h| BeamEntry {
                output: vocab.decode(&h.tokens),
                score: h.final_score.unwrap_or(f64::NEG_INFINITY),
            })
            .collect(),
    })
}
