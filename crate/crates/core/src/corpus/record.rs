use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Coarse part-of-speech tag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Adverb,
    PostpositionalParticle,
    AuxiliaryVerb,
    Filler,
    Other,
}

impl Pos {
    pub const ALL: [Pos; 8] = [
        Pos::Noun,
        Pos::Verb,
        Pos::Adjective,
        Pos::Adverb,
        Pos::PostpositionalParticle,
        Pos::AuxiliaryVerb,
        Pos::Filler,
        Pos::Other,
    ];

    /// Nouns, verbs, adjectives and adverbs are content words.
    pub fn is_content(self) -> bool {
        matches!(self, Pos::Noun | Pos::Verb | Pos::Adjective | Pos::Adverb)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "noun",
            Pos::Verb => "verb",
            Pos::Adjective => "adjective",
            Pos::Adverb => "adverb",
            Pos::PostpositionalParticle => "postpositional-particle",
            Pos::AuxiliaryVerb => "auxiliary-verb",
            Pos::Filler => "filler",
            Pos::Other => "other",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pos::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown POS tag `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub pos: Pos,
    pub is_content: bool,
}

impl Token {
    pub fn new(surface: impl Into<String>, pos: Pos) -> Self {
        Token {
            surface: surface.into(),
            pos,
            is_content: pos.is_content(),
        }
    }
}

/// One speaker utterance together with its context turns and the gold
/// repetitions written for it.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueRecord {
    pub dialogue_id: String,
    pub context: Vec<String>,
    pub utterance: Vec<Token>,
    pub references: Vec<String>,
    /// Free-form side channel. Synthetic corpora store the planted
    /// propensities under `"propensity"`.
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl DialogueRecord {
    pub fn utterance_text(&self) -> String {
        self.utterance
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn content_words(&self) -> impl Iterator<Item = (usize, &Token)> {
        self.utterance.iter().enumerate().filter(|(_, t)| t.is_content)
    }

    /// Planted propensities recorded by the synthetic generator, if any.
    pub fn planted_propensity(&self) -> Option<BTreeMap<String, f64>> {
        let value = self.meta.get("propensity")?;
        serde_json::from_value(value.clone()).ok()
    }
}

/// Violations found by [`validate_record`]. Empty means the record is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_record(record: &DialogueRecord) -> ValidationReport {
    let mut violations = Vec::new();
    if record.dialogue_id.is_empty() {
        violations.push("dialogue_id: empty".to_string());
    }
    if record.utterance.is_empty() {
        violations.push("utterance: empty".to_string());
    } else if !record.utterance.iter().any(|t| t.is_content) {
        violations.push("utterance: no content word".to_string());
    }
    for (i, token) in record.utterance.iter().enumerate() {
        if token.is_content != token.pos.is_content() {
            violations.push(format!(
                "utterance.tokens[{i}].content: inconsistent with pos `{}`",
                token.pos
            ));
        }
        if token.surface.is_empty() {
            violations.push(format!("utterance.tokens[{i}].surface: empty"));
        }
    }
    match record.references.len() {
        0 => violations.push("references: empty".to_string()),
        n if n > 3 => violations.push("references: >3".to_string()),
        _ => {}
    }
    for (i, r) in record.references.iter().enumerate() {
        if r.trim().is_empty() {
            violations.push(format!("references[{i}]: blank"));
        }
    }
    ValidationReport { violations }
}
