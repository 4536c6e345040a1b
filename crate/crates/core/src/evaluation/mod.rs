//! Automatic metrics, the rule-based baseline and significance testing.

mod rouge;
mod wilcoxon;

pub use rouge::{lcs_len, rouge_l, rouge_n};
pub use wilcoxon::{wilcoxon_rank_sum, SignificanceResult, TestMethod, EXACT_LIMIT};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DialogueRecord, Tokenizer};
use crate::util::mean;
use crate::vocab::SubwordVocab;
use crate::{Error, Result};

/// Template slot replaced by the chosen word.
pub const SLOT: &str = "<w>";
pub const DEFAULT_TEMPLATE: &str = "<w>, is it?";

/// True when some candidate token is a content word of the utterance that
/// also occurs in at least one reference.
pub fn repeated_word_correct<S: AsRef<str>>(
    candidate: &[S],
    record: &DialogueRecord,
    tokenizer: &dyn Tokenizer,
) -> bool {
    let content: HashSet<&str> = record
        .utterance
        .iter()
        .filter(|t| t.is_content)
        .map(|t| t.surface.as_str())
        .collect();
    let in_refs: HashSet<String> = record
        .references
        .iter()
        .flat_map(|r| tokenizer.surfaces(r))
        .collect();
    candidate
        .iter()
        .map(AsRef::as_ref)
        .any(|w| content.contains(w) && in_refs.contains(w))
}

/// Fills `template` with a content word drawn uniformly from the utterance.
pub fn rule_based_response(record: &DialogueRecord, template: &str, seed: u64) -> Result<String> {
    let words: Vec<&str> = record
        .content_words()
        .map(|(_, t)| t.surface.as_str())
        .collect();
    if words.is_empty() {
        return Err(Error::NoScorableWords);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = words[rng.gen_range(0..words.len())];
    Ok(template.replacen(SLOT, w, 1))
}

/// Unit over which ROUGE n-grams are counted.
#[derive(Debug, Clone, Default)]
pub enum RougeUnit {
    #[default]
    Token,
    Subword(SubwordVocab),
}

impl RougeUnit {
    fn units(&self, tokens: &[String]) -> Vec<String> {
        match self {
            RougeUnit::Token => tokens.to_vec(),
            RougeUnit::Subword(vocab) => {
                let (ids, _) = vocab.encode_words(tokens);
                ids.iter()
                    .map(|&id| vocab.piece(id).unwrap_or("<unk>").to_string())
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerExample {
    pub dialogue_id: Vec<String>,
    pub rouge1: Vec<f64>,
    pub rouge2: Vec<f64>,
    pub rouge_l: Vec<f64>,
    /// 100 when correct, 0 otherwise.
    pub repeated_word: Vec<f64>,
}

/// All values are percentages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub repeated_word_pct: f64,
    pub n: usize,
    pub per_example: PerExample,
}

impl MetricsReport {
    pub fn metric(&self, name: &str) -> Option<&[f64]> {
        match name {
            "rouge1" | "rg-1" => Some(&self.per_example.rouge1),
            "rouge2" | "rg-2" => Some(&self.per_example.rouge2),
            "rougeL" | "rouge-l" | "rg-l" => Some(&self.per_example.rouge_l),
            "repeated" | "%" | "repeated_word" => Some(&self.per_example.repeated_word),
            _ => None,
        }
    }

    pub fn table_header(label_width: usize) -> String {
        format!(
            "{:<w$} {:>7} {:>7} {:>7} {:>7}",
            "system",
            "RG-1",
            "RG-2",
            "RG-L",
            "%",
            w = label_width
        )
    }

    pub fn table_row(&self, label: &str, label_width: usize) -> String {
        format!(
            "{:<w$} {:>7.2} {:>7.2} {:>7.2} {:>7.2}",
            label,
            self.rouge1,
            self.rouge2,
            self.rouge_l,
            self.repeated_word_pct,
            w = label_width
        )
    }

    pub fn to_table(&self, label: &str) -> String {
        let w = label.len().max(6);
        let mut s = String::new();
        writeln!(s, "{}", Self::table_header(w)).unwrap();
        writeln!(s, "{}", self.table_row(label, w)).unwrap();
        s
    }
}

/// Scores `outputs` (dialogue id, response text) against `records`.
pub fn evaluate_system(
    outputs: &[(String, String)],
    records: &[DialogueRecord],
    tokenizer: &dyn Tokenizer,
    unit: &RougeUnit,
) -> Result<MetricsReport> {
    let mut by_id: BTreeMap<&str, &str> = BTreeMap::new();
    let mut duplicate = BTreeSet::new();
    for (id, text) in outputs {
        if by_id.insert(id.as_str(), text.as_str()).is_some() {
            duplicate.insert(id.clone());
        }
    }
    let known: HashSet<&str> = records.iter().map(|r| r.dialogue_id.as_str()).collect();
    let missing: Vec<&str> = records
        .iter()
        .map(|r| r.dialogue_id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    let unknown: Vec<&str> = by_id.keys().copied().filter(|id| !known.contains(id)).collect();
    if !missing.is_empty() || !duplicate.is_empty() || !unknown.is_empty() {
        let mut msg = String::new();
        if !missing.is_empty() {
            write!(msg, "missing outputs for: {}", missing.join(", ")).unwrap();
        }
        if !duplicate.is_empty() {
            let d: Vec<_> = duplicate.into_iter().collect();
            write!(msg, "{}duplicate outputs for: {}", if msg.is_empty() { "" } else { "; " }, d.join(", ")).unwrap();
        }
        if !unknown.is_empty() {
            write!(msg, "{}unknown ids: {}", if msg.is_empty() { "" } else { "; " }, unknown.join(", ")).unwrap();
        }
        return Err(Error::Invalid(msg));
    }

    let mut per = PerExample::default();
    for r in records {
        let text = by_id[r.dialogue_id.as_str()];
        let cand = tokenizer.surfaces(text);
        let refs: Vec<Vec<String>> = r
            .references
            .iter()
            .map(|x| unit.units(&tokenizer.surfaces(x)))
            .collect();
        let cand_units = unit.units(&cand);
        per.dialogue_id.push(r.dialogue_id.clone());
        per.rouge1.push(100.0 * rouge_n(&cand_units, &refs, 1)?);
        per.rouge2.push(100.0 * rouge_n(&cand_units, &refs, 2)?);
        per.rouge_l.push(100.0 * rouge_l(&cand_units, &refs)?);
        per.repeated_word
            .push(if repeated_word_correct(&cand, r, tokenizer) { 100.0 } else { 0.0 });
    }
    Ok(MetricsReport {
        rouge1: mean(&per.rouge1),
        rouge2: mean(&per.rouge2),
        rouge_l: mean(&per.rouge_l),
        repeated_word_pct: mean(&per.repeated_word),
        n: records.len(),
        per_example: per,
    })
}
