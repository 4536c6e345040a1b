use std::collections::HashMap;

use rand::Rng;

use super::{GenerativeModel, StepOutput};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    probs: Vec<f64>,
    attention: Vec<f64>,
}

/// Generative model defined by explicit tables keyed on
/// `(source, prefix)`. Lookups of missing keys fail.
#[derive(Debug, Clone, PartialEq)]
pub struct TableModel {
    k: usize,
    eos: u32,
    max_len: usize,
    entries: HashMap<(Vec<u32>, Vec<u32>), Entry>,
}

impl TableModel {
    pub fn new(k: usize, eos: u32, max_len: usize) -> Self {
        TableModel {
            k,
            eos,
            max_len,
            entries: HashMap::new(),
        }
    }

    /// Stores the next-token distribution and attention row for a prefix.
    /// `probs` must sum to 1 within 1e-12; an empty attention row stands for
    /// uniform attention.
    pub fn insert(&mut self, source: &[u32], prefix: &[u32], probs: Vec<f64>, attention: Vec<f64>) -> Result<()> {
        if probs.len() != self.k {
            return Err(Error::Param(format!("expected {} probabilities, got {}", self.k, probs.len())));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 || probs.iter().any(|p| *p < 0.0) {
            return Err(Error::Param(format!("probabilities must form a distribution (sum {s})")));
        }
        let attention = if attention.is_empty() {
            vec![1.0 / source.len().max(1) as f64; source.len()]
        } else {
            attention
        };
        if attention.len() != source.len() {
            return Err(Error::Param("attention row must cover every source position".into()));
        }
        self.entries
            .insert((source.to_vec(), prefix.to_vec()), Entry { probs, attention });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fills every prefix (free of EOS, shorter than `max_len`) over `k`
    /// tokens with a random distribution and attention row. Probabilities
    /// are normalized exponentials; about a third of non-EOS entries are
    /// zeroed to create sparse rows.
    pub fn random_full_tree(k: usize, eos: u32, max_len: usize, source: &[u32], rng: &mut impl Rng) -> Self {
        let mut model = TableModel::new(k, eos, max_len);
        let mut frontier: Vec<Vec<u32>> = vec![Vec::new()];
        while let Some(prefix) = frontier.pop() {
            let mut w: Vec<f64> = (0..k)
                .map(|i| {
                    if i as u32 != eos && rng.gen_bool(0.3) {
                        0.0
                    } else {
                        -(rng.gen::<f64>().max(1e-12)).ln()
                    }
                })
                .collect();
            if w.iter().all(|x| *x == 0.0) {
                w[eos as usize] = 1.0;
            }
            let mut probs = normalize(&w);
            // force an exact unit sum by assigning the residual to the largest entry
            let resid = 1.0 - probs.iter().sum::<f64>();
            let imax = (0..k).max_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap();
            probs[imax] += resid;
            let att_w: Vec<f64> = (0..source.len()).map(|_| rng.gen::<f64>() + 0.01).collect();
            let attention = normalize(&att_w);
            model
                .insert(source, &prefix, probs.clone(), attention)
                .expect("generated rows are valid");
            if prefix.len() + 1 < max_len {
                for tok in 0..k as u32 {
                    if tok != eos && probs[tok as usize] > 0.0 {
                        let mut next = prefix.clone();
                        next.push(tok);
                        frontier.push(next);
                    }
                }
            }
        }
        model
    }
}

fn normalize(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

impl GenerativeModel for TableModel {
    fn vocab_size(&self) -> usize {
        self.k
    }

    fn eos_id(&self) -> u32 {
        self.eos
    }

    fn max_target_len(&self) -> usize {
        self.max_len
    }

    fn provides_attention(&self) -> bool {
        true
    }

    fn step(&self, source: &[u32], prefix: &[u32]) -> Result<StepOutput> {
        let e = self
            .entries
            .get(&(source.to_vec(), prefix.to_vec()))
            .ok_or_else(|| Error::Lookup(format!("no table entry for source {source:?}, prefix {prefix:?}")))?;
        Ok(StepOutput {
            log_probs: e.probs.iter().map(|p| p.ln()).collect(),
            attention: Some(e.attention.clone()),
        })
    }
}
