use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::record::{DialogueRecord, Pos};
use super::tokenizer::Tokenizer;

#[derive(Debug, Clone, Copy, Default)]
pub struct StatsOptions {
    /// Match utterance and reference words through [`Tokenizer::lemma`]
    /// instead of exact surfaces.
    pub match_lemmas: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosShare {
    pub all_pct: f64,
    pub overlap_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_dialogues: usize,
    pub n_repetitions: usize,
    pub avg_reps_per_utterance: f64,
    pub avg_tokens_utterance: f64,
    pub avg_tokens_repetition: f64,
    pub word_overlap_rate: f64,
    pub content_word_overlap_rate: f64,
    pub pos_table: BTreeMap<Pos, PosShare>,
}

pub fn compute_stats(records: &[DialogueRecord], tokenizer: &dyn Tokenizer) -> CorpusStats {
    compute_stats_with(records, tokenizer, StatsOptions::default())
}

/// Overlap rates count token occurrences and average over every
/// (utterance, reference) pair.
pub fn compute_stats_with(
    records: &[DialogueRecord],
    tokenizer: &dyn Tokenizer,
    opts: StatsOptions,
) -> CorpusStats {
    let norm = |s: &str| -> String {
        if opts.match_lemmas {
            tokenizer.lemma(s).into_owned()
        } else {
            s.to_string()
        }
    };

    let mut n_reps = 0usize;
    let mut utt_tokens = 0usize;
    let mut rep_tokens = 0usize;
    let mut word_rate_sum = 0.0;
    let mut content_rate_sum = 0.0;
    let mut content_pairs = 0usize;
    let mut pos_all: BTreeMap<Pos, usize> = BTreeMap::new();
    let mut pos_overlap: BTreeMap<Pos, usize> = BTreeMap::new();
    let mut total_overlap = 0usize;

    for r in records {
        utt_tokens += r.utterance.len();
        let utt_norm: Vec<String> = r.utterance.iter().map(|t| norm(&t.surface)).collect();
        let mut any_ref: HashSet<String> = HashSet::new();
        for reference in &r.references {
            n_reps += 1;
            let ref_words: HashSet<String> = tokenizer
                .tokenize(reference)
                .into_iter()
                .map(|t| norm(&t.surface))
                .collect();
            rep_tokens += tokenizer.tokenize(reference).len();

            let n_utt = r.utterance.len();
            if n_utt > 0 {
                let hit = utt_norm.iter().filter(|w| ref_words.contains(*w)).count();
                word_rate_sum += hit as f64 / n_utt as f64;
            }
            let content: Vec<&String> = r
                .utterance
                .iter()
                .zip(&utt_norm)
                .filter(|(t, _)| t.is_content)
                .map(|(_, w)| w)
                .collect();
            if !content.is_empty() {
                let hit = content.iter().filter(|w| ref_words.contains(**w)).count();
                content_rate_sum += hit as f64 / content.len() as f64;
                content_pairs += 1;
            }
            any_ref.extend(ref_words);
        }
        for (t, w) in r.utterance.iter().zip(&utt_norm) {
            *pos_all.entry(t.pos).or_default() += 1;
            if any_ref.contains(w) {
                *pos_overlap.entry(t.pos).or_default() += 1;
                total_overlap += 1;
            }
        }
    }

    let pct = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    let mut pos_table = BTreeMap::new();
    for pos in Pos::ALL {
        let all = pos_all.get(&pos).copied().unwrap_or(0);
        let ov = pos_overlap.get(&pos).copied().unwrap_or(0);
        if all > 0 {
            pos_table.insert(
                pos,
                PosShare {
                    all_pct: pct(all, utt_tokens),
                    overlap_pct: pct(ov, total_overlap),
                },
            );
        }
    }
    let n = records.len();
    let div = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
    CorpusStats {
        n_dialogues: n,
        n_repetitions: n_reps,
        avg_reps_per_utterance: div(n_reps as f64, n),
        avg_tokens_utterance: div(utt_tokens as f64, n),
        avg_tokens_repetition: div(rep_tokens as f64, n_reps),
        word_overlap_rate: 100.0 * div(word_rate_sum, n_reps),
        content_word_overlap_rate: 100.0 * div(content_rate_sum, content_pairs),
        pos_table,
    }
}

impl CorpusStats {
    /// Flat `key value` rendering, one statistic per line.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "total_dialogues {}", self.n_dialogues);
        let _ = writeln!(s, "total_repetitions {}", self.n_repetitions);
        let _ = writeln!(s, "avg_repetitions_per_utterance {:.2}", self.avg_reps_per_utterance);
        let _ = writeln!(s, "avg_tokens_per_utterance {:.2}", self.avg_tokens_utterance);
        let _ = writeln!(s, "avg_tokens_per_repetition {:.2}", self.avg_tokens_repetition);
        let _ = writeln!(s, "word_overlap_rate {:.2}", self.word_overlap_rate);
        let _ = writeln!(s, "content_word_overlap_rate {:.2}", self.content_word_overlap_rate);
        for (pos, share) in &self.pos_table {
            let _ = writeln!(
                s,
                "pos.{pos} {:.2} {:.2}",
                share.all_pct, share.overlap_pct
            );
        }
        s
    }
}
