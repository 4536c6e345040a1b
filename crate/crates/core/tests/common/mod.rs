#![allow(dead_code)]

use repgen::corpus::{DialogueRecord, Pos, Token};

pub fn tok(s: &str, pos: Pos) -> Token {
    Token::new(s, pos)
}

/// Record whose utterance words are given as `surface/tag` with tags
/// n, v, a, r (adverb), p (particle), x (auxiliary), f (filler), o (other).
pub fn record(id: &str, utterance: &str, refs: &[&str]) -> DialogueRecord {
    let utterance = utterance
        .split_whitespace()
        .map(|w| {
            let (s, t) = w.split_once('/').unwrap_or((w, "n"));
            let pos = match t {
                "n" => Pos::Noun,
                "v" => Pos::Verb,
                "a" => Pos::Adjective,
                "r" => Pos::Adverb,
                "p" => Pos::PostpositionalParticle,
                "x" => Pos::AuxiliaryVerb,
                "f" => Pos::Filler,
                _ => Pos::Other,
            };
            Token::new(s, pos)
        })
        .collect();
    DialogueRecord {
        dialogue_id: id.to_string(),
        context: vec![],
        utterance,
        references: refs.iter().map(|s| s.to_string()).collect(),
        meta: Default::default(),
    }
}

use rand::Rng;
use repgen::repeat_scorer::{RepeatScoreMap, SubwordScore};
use repgen::seq2seq::TableModel;
use repgen::wls::{step_loss, TargetDistribution};

/// Relative error between `analytic` and a central finite difference of
/// the step loss, measured in the 2-norm.
pub fn fd_relative_error(logits: &[f64], q: &TargetDistribution, analytic: &[f64]) -> f64 {
    let h = 1e-5;
    let mut numeric = Vec::with_capacity(logits.len());
    for i in 0..logits.len() {
        let mut up = logits.to_vec();
        let mut down = logits.to_vec();
        up[i] += h;
        down[i] -= h;
        numeric.push((step_loss(&up, q) - step_loss(&down, q)) / (2.0 * h));
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-8)
}

pub fn score_map(pairs: &[(u32, f64)]) -> RepeatScoreMap {
    RepeatScoreMap {
        word_scores: vec![],
        subword_scores: pairs
            .iter()
            .enumerate()
            .map(|(position, &(id, score))| SubwordScore { position, id, score })
            .collect(),
    }
}

/// A random enumerable decoding problem: table model over `k <= 5`
/// tokens with EOS 0, length bound `<= 5`, and a random score map.
pub struct Instance {
    pub model: TableModel,
    pub source: Vec<u32>,
    pub map: RepeatScoreMap,
    pub k: usize,
    pub max_len: usize,
}

pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let k = rng.gen_range(2..=5);
    let max_len = rng.gen_range(1..=5);
    let source: Vec<u32> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(1..k as u32)).collect();
    let model = TableModel::random_full_tree(k, 0, max_len, &source, rng);
    let mut pairs = Vec::new();
    for id in 1..k as u32 {
        if rng.gen_bool(0.6) {
            pairs.push((id, rng.gen::<f64>()));
        }
    }
    Instance { model, source, map: score_map(&pairs), k, max_len }
}
