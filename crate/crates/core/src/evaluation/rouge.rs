use std::collections::HashMap;

use crate::{Error, Result};

fn ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

fn f1(overlap: usize, cand: usize, reference: usize) -> f64 {
    if overlap == 0 || cand == 0 || reference == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand as f64;
    let r = overlap as f64 / reference as f64;
    2.0 * p * r / (p + r)
}

fn best<S: AsRef<str>, R: AsRef<[S]>>(references: &[R], score: impl Fn(&[S]) -> f64) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::Invalid("no references".into()));
    }
    Ok(references
        .iter()
        .map(|r| score(r.as_ref()))
        .fold(0.0, f64::max))
}

/// Clipped n-gram F1, max over references.
pub fn rouge_n<S: AsRef<str>, R: AsRef<[S]>>(candidate: &[S], references: &[R], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Param("n must be >= 1".into()));
    }
    let cand = ngrams(candidate, n);
    let cand_total: usize = cand.values().sum();
    best(references, |r| {
        let reference = ngrams(r, n);
        let overlap: usize = cand
            .iter()
            .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
            .sum();
        f1(overlap, cand_total, reference.values().sum())
    })
}

pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F1, max over references.
pub fn rouge_l<S: AsRef<str>, R: AsRef<[S]>>(candidate: &[S], references: &[R]) -> Result<f64> {
    best(references, |r| f1(lcs_len(candidate, r), candidate.len(), r.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn hand_counted() {
        let r1 = rouge_n(&t("a b c"), &[t("a b d")], 1).unwrap();
        assert!((r1 - 2.0 / 3.0).abs() < 1e-9);
        let rl = rouge_l(&t("a c b"), &[t("a b c")]).unwrap();
        assert!((rl - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(rouge_n(&t("x y"), &[t("a b")], 1).unwrap(), 0.0);
        assert_eq!(rouge_n(&t("a b c"), &[t("a b c")], 2).unwrap(), 1.0);
    }

    #[test]
    fn clipping_and_max() {
        // "a a a" vs "a b": overlap 1, P=1/3, R=1/2
        let r = rouge_n(&t("a a a"), &[t("a b")], 1).unwrap();
        assert!((r - 0.4).abs() < 1e-12);
        // LCS F1 0.4 and 0.7-ish references: max wins
        let refs = [t("a x x x x"), t("a b")];
        let single = rouge_l(&t("a b c"), &refs[1..]).unwrap();
        assert_eq!(rouge_l(&t("a b c"), &refs).unwrap(), single);
    }

    #[test]
    fn errors_and_empty() {
        let none: Vec<Vec<String>> = vec![];
        assert!(rouge_l(&t("a"), &none).is_err());
        assert_eq!(rouge_n(&t(""), &[t("a")], 1).unwrap(), 0.0);
    }
}
