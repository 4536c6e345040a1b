use std::collections::HashSet;
use std::ops::Range;

use crate::corpus::{split_words, DialogueRecord, Token};

/// Labels every content word of the utterance: 1 when its surface occurs in
/// any of `references`, else 0.
pub fn label_against<S: AsRef<str>>(utterance: &[Token], references: &[S]) -> Vec<(Range<usize>, u8)> {
    let words: HashSet<String> = references
        .iter()
        .flat_map(|r| split_words(r.as_ref()))
        .collect();
    utterance
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_content)
        .map(|(i, t)| (i..i + 1, u8::from(words.contains(&t.surface))))
        .collect()
}

/// Labels against all references of the record.
pub fn label_content_words(record: &DialogueRecord) -> Vec<(Range<usize>, u8)> {
    label_against(&record.utterance, &record.references)
}
