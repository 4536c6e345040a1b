//! Word-piece subword vocabulary for the built-in model stack.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const UNK: u32 = 2;
const SPECIALS: [&str; 3] = ["<s>", "</s>", "<unk>"];
const CONT: &str = "##";

/// Greedy longest-match word-piece vocabulary. Frequent words are single
/// pieces; rarer words fall back to character pieces, continuation pieces
/// carry a `##` prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct SubwordVocab {
    pieces: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for SubwordVocab {
    fn from(pieces: Vec<String>) -> Self {
        let index = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as u32))
            .collect();
        SubwordVocab { pieces, index }
    }
}

impl From<SubwordVocab> for Vec<String> {
    fn from(v: SubwordVocab) -> Self {
        v.pieces
    }
}

impl SubwordVocab {
    /// Words seen at least `min_word_freq` times become whole pieces. Every
    /// character seen gets an initial and a continuation piece.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>, min_word_freq: usize) -> Self {
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        let mut chars = BTreeSet::new();
        for w in words {
            *freq.entry(w).or_default() += 1;
            chars.extend(w.chars());
        }
        let mut pieces: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        pieces.extend(
            freq.iter()
                .filter(|(_, &n)| n >= min_word_freq.max(1))
                .map(|(w, _)| w.to_string()),
        );
        let mut seen: BTreeSet<String> = pieces.iter().cloned().collect();
        for c in &chars {
            for p in [c.to_string(), format!("{CONT}{c}")] {
                if seen.insert(p.clone()) {
                    pieces.push(p);
                }
            }
        }
        SubwordVocab::from(pieces)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < SPECIALS.len()
    }

    /// Segments one word. Unsegmentable words map to a single `<unk>`.
    pub fn segment_word(&self, word: &str) -> Vec<u32> {
        if let Some(&id) = self.index.get(word) {
            return vec![id];
        }
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        let mut out = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut found = None;
            for end in (start + 1..=chars.len()).rev() {
                let from = chars[start].0;
                let to = chars.get(end).map_or(word.len(), |c| c.0);
                let s = &word[from..to];
                let key = if start == 0 {
                    s.to_string()
                } else {
                    format!("{CONT}{s}")
                };
                if let Some(&id) = self.index.get(&key) {
                    found = Some((id, end));
                    break;
                }
            }
            match found {
                Some((id, end)) => {
                    out.push(id);
                    start = end;
                }
                None => return vec![UNK],
            }
        }
        out
    }

    /// Encodes words and returns the subword span of each word.
    pub fn encode_words<S: AsRef<str>>(&self, words: &[S]) -> (Vec<u32>, Vec<Range<usize>>) {
        let mut ids = Vec::new();
        let mut spans = Vec::with_capacity(words.len());
        for w in words {
            let start = ids.len();
            ids.extend(self.segment_word(w.as_ref()));
            spans.push(start..ids.len());
        }
        (ids, spans)
    }

    /// Joins pieces back into space-separated words, dropping specials.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut words: Vec<String> = Vec::new();
        for &id in ids {
            if Self::is_special(id) {
                continue;
            }
            let Some(p) = self.piece(id) else { continue };
            match p.strip_prefix(CONT) {
                Some(rest) if !words.is_empty() => words.last_mut().unwrap().push_str(rest),
                _ => words.push(p.to_string()),
            }
        }
        words.join(" ")
    }
}
