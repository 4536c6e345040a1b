use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::record::DialogueRecord;

/// Training view: each record paired with exactly one reference, chosen
/// uniformly at random under `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingView {
    pub pairs: Vec<(DialogueRecord, usize)>,
    pub seed: u64,
}

impl TrainingView {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DialogueRecord, &str)> {
        self.pairs
            .iter()
            .map(|(r, i)| (r, r.references[*i].as_str()))
    }
}

pub fn split_for_training(records: &[DialogueRecord], seed: u64) -> TrainingView {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = records
        .iter()
        .map(|r| {
            let n = r.references.len().max(1);
            (r.clone(), rng.gen_range(0..n))
        })
        .collect();
    TrainingView { pairs, seed }
}
