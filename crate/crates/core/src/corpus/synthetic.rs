use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::{DialogueRecord, Pos, Token};
use crate::{Error, Result};

/// Slot marker inside response templates.
pub const SLOT: &str = "<w>";

pub const PARTICLES: &[&str] = &["wa", "ga", "wo", "ni", "de", "to", "mo", "no"];
pub const AUXILIARIES: &[&str] = &["desu", "mashita", "masu", "ta"];
pub const FILLERS: &[&str] = &["eto", "ano", "maa"];
pub const OTHERS: &[&str] = &["ne", "yo", "."];
/// Backchannels used for references that repeat nothing.
pub const GENERIC: &[&str] = &["un", "hai", "sou desune", "naruhodo", "hee sou nanda"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Number of content words to invent when `planted_propensity` is empty.
    pub vocab_size: usize,
    pub n_records: usize,
    /// Utterance length in tokens, inclusive.
    pub utterance_length_range: (usize, usize),
    /// Explicit propensities. When non-empty these words form the whole
    /// content lexicon; otherwise `vocab_size` words are invented with
    /// propensities drawn uniformly from `[0, 1]`.
    pub planted_propensity: BTreeMap<String, f64>,
    pub template_pool: Vec<String>,
    /// Per-token probability of inserting an off-template token into a
    /// reference.
    pub noise_rate: f64,
    /// Probability that a reference is a generic backchannel instead of a
    /// filled template.
    pub generic_rate: f64,
    /// Number of references per record, inclusive.
    pub references_range: (usize, usize),
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            vocab_size: 60,
            n_records: 1000,
            utterance_length_range: (5, 10),
            planted_propensity: BTreeMap::new(),
            template_pool: default_templates(),
            noise_rate: 0.05,
            generic_rate: 0.0,
            references_range: (1, 3),
            seed: 0,
        }
    }
}

pub fn default_templates() -> Vec<String> {
    [
        "<w> desuka",
        "aa <w> desuka",
        "<w> nandesune",
        "hee <w> desune",
        "<w> to <w> desuka",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

impl SyntheticConfig {
    pub fn check(&self) -> Result<()> {
        let (lo, hi) = self.utterance_length_range;
        if lo < 3 || hi < lo {
            return Err(Error::Param(format!(
                "utterance_length_range must satisfy 3 <= min <= max, got ({lo}, {hi})"
            )));
        }
        let (rlo, rhi) = self.references_range;
        if rlo < 1 || rhi > 3 || rhi < rlo {
            return Err(Error::Param(format!(
                "references_range must lie within [1, 3], got ({rlo}, {rhi})"
            )));
        }
        if let Some((w, p)) = self
            .planted_propensity
            .iter()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::Param(format!("propensity of `{w}` is {p}, outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::Param("noise_rate must be a probability".into()));
        }
        if !(0.0..=1.0).contains(&self.generic_rate) {
            return Err(Error::Param("generic_rate must be a probability".into()));
        }
        if self.template_pool.iter().any(|t| !t.contains(SLOT)) {
            return Err(Error::Param(format!("every template needs a `{SLOT}` slot")));
        }
        if self.planted_propensity.is_empty() && self.vocab_size == 0 {
            return Err(Error::Param("vocab_size must be positive".into()));
        }
        Ok(())
    }
}

/// Content lexicon with planted propensities and tags.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLexicon {
    pub words: Vec<(String, Pos, f64)>,
}

const ONSETS: &[&str] = &["k", "s", "t", "n", "h", "m", "r", "g", "b", "p", "z", "d"];
const VOWELS: &[&str] = &["a", "i", "u", "e", "o"];

fn content_pos(rng: &mut ChaCha8Rng) -> Pos {
    match rng.gen_range(0..20) {
        0..=9 => Pos::Noun,
        10..=14 => Pos::Verb,
        15..=17 => Pos::Adjective,
        _ => Pos::Adverb,
    }
}

impl SyntheticLexicon {
    pub fn build(config: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Self {
        let reserved: BTreeSet<&str> = PARTICLES
            .iter()
            .chain(AUXILIARIES)
            .chain(FILLERS)
            .chain(OTHERS)
            .copied()
            .collect();
        if !config.planted_propensity.is_empty() {
            let words = config
                .planted_propensity
                .iter()
                .map(|(w, &p)| (w.clone(), content_pos(rng), p))
                .collect();
            return SyntheticLexicon { words };
        }
        let mut seen = BTreeSet::new();
        let mut words = Vec::with_capacity(config.vocab_size);
        while words.len() < config.vocab_size {
            let syllables = rng.gen_range(2..=3);
            let w: String = (0..syllables)
                .map(|_| {
                    let c = ONSETS[rng.gen_range(0..ONSETS.len())];
                    let v = VOWELS[rng.gen_range(0..VOWELS.len())];
                    format!("{c}{v}")
                })
                .collect();
            if reserved.contains(w.as_str()) || !seen.insert(w.clone()) {
                continue;
            }
            let pos = content_pos(rng);
            let p: f64 = rng.gen();
            words.push((w, pos, p));
        }
        SyntheticLexicon { words }
    }

    pub fn propensity(&self) -> BTreeMap<String, f64> {
        self.words.iter().map(|(w, _, p)| (w.clone(), *p)).collect()
    }
}

/// Draws an index with probability proportional to `weights`, uniformly when
/// every weight is zero.
fn weighted_pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rng.gen_range(0..weights.len());
    }
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

fn function_token(rng: &mut ChaCha8Rng) -> Token {
    match rng.gen_range(0..10) {
        0..=5 => Token::new(*PARTICLES.choose(rng).unwrap(), Pos::PostpositionalParticle),
        6..=8 => Token::new(*AUXILIARIES.choose(rng).unwrap(), Pos::AuxiliaryVerb),
        _ => Token::new(*OTHERS.choose(rng).unwrap(), Pos::Other),
    }
}

fn make_utterance(
    lexicon: &SyntheticLexicon,
    len: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Token> {
    let mut tokens = Vec::with_capacity(len);
    let mut available: Vec<usize> = (0..lexicon.words.len()).collect();
    available.shuffle(rng);
    if rng.gen_bool(0.1) {
        tokens.push(Token::new(*FILLERS.choose(rng).unwrap(), Pos::Filler));
    }
    while tokens.len() < len {
        let want_content = tokens.last().is_none_or(|t: &Token| !t.is_content) && rng.gen_bool(0.8);
        match (want_content, available.pop()) {
            (true, Some(i)) => {
                let (w, pos, _) = &lexicon.words[i];
                tokens.push(Token::new(w.clone(), *pos));
            }
            (_, popped) => {
                if let Some(i) = popped {
                    available.push(i);
                }
                tokens.push(function_token(rng));
            }
        }
    }
    if !tokens.iter().any(|t| t.is_content) {
        let (w, pos, _) = &lexicon.words[rng.gen_range(0..lexicon.words.len())];
        tokens[len - 1] = Token::new(w.clone(), *pos);
    }
    tokens
}

fn fill_template(
    template: &str,
    candidates: &[(String, f64)],
    noise_rate: f64,
    rng: &mut ChaCha8Rng,
) -> String {
    let mut remaining: Vec<(String, f64)> = candidates.to_vec();
    let mut out: Vec<String> = Vec::new();
    for piece in template.split_whitespace() {
        if piece == SLOT {
            let word = if remaining.is_empty() {
                let i = rng.gen_range(0..candidates.len());
                candidates[i].0.clone()
            } else {
                let weights: Vec<f64> = remaining.iter().map(|(_, p)| *p).collect();
                remaining.remove(weighted_pick(&weights, rng)).0
            };
            out.push(word);
        } else {
            out.push(piece.to_string());
        }
        if noise_rate > 0.0 && rng.gen_bool(noise_rate) {
            let noise = if rng.gen_bool(0.5) {
                *FILLERS.choose(rng).unwrap()
            } else {
                *OTHERS.choose(rng).unwrap()
            };
            out.push(noise.to_string());
        }
    }
    out.join(" ")
}

/// Generates a corpus whose references repeat utterance content words with
/// probability proportional to their planted propensity. Each record's
/// `meta.propensity` holds the ground truth for its content words.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<DialogueRecord>> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lexicon = SyntheticLexicon::build(config, &mut rng);
    let templates = if config.template_pool.is_empty() {
        default_templates()
    } else {
        config.template_pool.clone()
    };
    let (lo, hi) = config.utterance_length_range;
    let (rlo, rhi) = config.references_range;
    let prop = lexicon.propensity();
    let width = config.n_records.max(1).to_string().len();

    let mut records = Vec::with_capacity(config.n_records);
    for n in 0..config.n_records {
        let len = rng.gen_range(lo..=hi);
        let utterance = make_utterance(&lexicon, len, &mut rng);
        let context = (0..2)
            .map(|_| {
                let l = rng.gen_range(3..=6);
                make_utterance(&lexicon, l, &mut rng)
                    .iter()
                    .map(|t| t.surface.as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let mut candidates: Vec<(String, f64)> = Vec::new();
        for t in utterance.iter().filter(|t| t.is_content) {
            if !candidates.iter().any(|(w, _)| *w == t.surface) {
                candidates.push((t.surface.clone(), prop[&t.surface]));
            }
        }
        let n_refs = rng.gen_range(rlo..=rhi);
        let references = (0..n_refs)
            .map(|_| {
                if config.generic_rate > 0.0 && rng.gen_bool(config.generic_rate) {
                    return GENERIC.choose(&mut rng).unwrap().to_string();
                }
                let template = templates.choose(&mut rng).unwrap();
                fill_template(template, &candidates, config.noise_rate, &mut rng)
            })
            .collect();
        let propensity: BTreeMap<String, f64> = candidates.into_iter().collect();
        let mut meta = BTreeMap::new();
        meta.insert(
            "propensity".to_string(),
            serde_json::to_value(propensity).expect("map of floats serializes"),
        );
        records.push(DialogueRecord {
            dialogue_id: format!("syn-{n:0width$}"),
            context,
            utterance,
            references,
            meta,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_record;

    #[test]
    fn records_are_valid() {
        let recs = generate_synthetic(&SyntheticConfig {
            n_records: 200,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(recs.len(), 200);
        for r in &recs {
            assert!(validate_record(r).is_valid(), "{:?}", validate_record(r));
            let (lo, hi) = (5, 10);
            assert!((lo..=hi).contains(&r.utterance.len()));
            assert!(r.planted_propensity().is_some());
        }
    }

    #[test]
    fn rejects_short_length_range() {
        let cfg = SyntheticConfig {
            utterance_length_range: (2, 5),
            ..Default::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Param(_))));
    }

    #[test]
    fn rejects_out_of_range_propensity() {
        let mut cfg = SyntheticConfig::default();
        cfg.planted_propensity.insert("kuma".into(), 1.5);
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn weighted_pick_never_selects_zero_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(weighted_pick(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }
}
