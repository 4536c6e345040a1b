use std::borrow::Cow;
use std::collections::HashMap;

use super::record::{DialogueRecord, Pos, Token};

/// Word-level tokenizer and tagger. Real deployments plug in a
/// morphological analyzer; synthetic corpora carry gold tags inline.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<Token>;

    /// Normal form used when lemma matching is enabled.
    fn lemma<'a>(&self, surface: &'a str) -> Cow<'a, str> {
        Cow::Borrowed(surface)
    }

    fn surfaces(&self, text: &str) -> Vec<String> {
        self.tokenize(text).into_iter().map(|t| t.surface).collect()
    }
}

fn is_punct(c: char) -> bool {
    matches!(c, ',' | '.' | '?' | '!' | ';' | ':' | '、' | '。' | '？' | '！')
}

/// Splits on whitespace, detaches punctuation into separate tokens.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut cur = String::new();
        for c in chunk.chars() {
            if is_punct(c) {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// Whitespace tokenizer that tags words from a surface → POS lexicon.
/// Words missing from the lexicon are tagged [`Pos::Other`].
#[derive(Debug, Clone, Default)]
pub struct LexiconTokenizer {
    lexicon: HashMap<String, Pos>,
}

impl LexiconTokenizer {
    pub fn new(lexicon: HashMap<String, Pos>) -> Self {
        LexiconTokenizer { lexicon }
    }

    /// Builds the lexicon from the gold tags of utterance tokens.
    /// The first tag seen for a surface wins.
    pub fn from_records(records: &[DialogueRecord]) -> Self {
        let mut lexicon = HashMap::new();
        for r in records {
            for t in &r.utterance {
                lexicon.entry(t.surface.clone()).or_insert(t.pos);
            }
        }
        LexiconTokenizer { lexicon }
    }

    pub fn insert(&mut self, surface: impl Into<String>, pos: Pos) {
        self.lexicon.insert(surface.into(), pos);
    }

    pub fn len(&self) -> usize {
        self.lexicon.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lexicon.is_empty()
    }
}

impl Tokenizer for LexiconTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        split_words(text)
            .into_iter()
            .map(|w| {
                let pos = self.lexicon.get(&w).copied().unwrap_or(Pos::Other);
                Token::new(w, pos)
            })
            .collect()
    }
}
