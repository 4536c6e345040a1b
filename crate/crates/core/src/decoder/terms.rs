use serde::{Deserialize, Serialize};

use crate::repeat_scorer::RepeatScoreMap;

/// `lp(Y) = (5 + |Y|)^alpha / (5 + 1)^alpha`
pub fn length_penalty(length: usize, alpha: f64) -> f64 {
    (5.0 + length as f64).powf(alpha) / 6f64.powf(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub value: f64,
    /// Set when some source position received no attention at all and the
    /// floor replaced its zero mass inside the log.
    pub floored: bool,
}

/// `beta * sum_i log(sum_j p_ij)` over source positions `i`, where
/// `attention[j][i]` is the attention of response step `j` on source
/// position `i`. The accumulated mass is not clipped at 1.
pub fn coverage_penalty(attention: &[Vec<f64>], beta: f64, floor: f64) -> Coverage {
    let n_src = attention.iter().map(Vec::len).max().unwrap_or(0);
    let mut floored = false;
    let mut total = 0.0;
    for i in 0..n_src {
        let mass: f64 = attention.iter().map(|row| row.get(i).copied().unwrap_or(0.0)).sum();
        let mass = if mass > 0.0 {
            mass
        } else {
            floored = true;
            floor
        };
        total += mass.ln();
    }
    Coverage {
        value: beta * total,
        floored,
    }
}

/// Coverage with the accumulated mass clipped at 1, as in the original
/// machine-translation scorer. Kept for comparison only.
pub fn clipped_coverage_penalty(attention: &[Vec<f64>], beta: f64, floor: f64) -> f64 {
    let n_src = attention.iter().map(Vec::len).max().unwrap_or(0);
    let mut total = 0.0;
    for i in 0..n_src {
        let mass: f64 = attention.iter().map(|row| row.get(i).copied().unwrap_or(0.0)).sum();
        total += mass.min(1.0).max(floor).ln();
    }
    beta * total
}

/// `log sum_j r(v_j)` over response positions, floored at `floor`.
/// Each occurrence of a scored subword contributes its score.
pub fn repeat_term(response: &[u32], scores: &RepeatScoreMap, floor: f64) -> f64 {
    let by_id = scores.by_id();
    let sum: f64 = response
        .iter()
        .map(|id| by_id.get(id).copied().unwrap_or(0.0))
        .sum();
    sum.max(floor).ln()
}

/// The individual terms behind one hypothesis score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTerms {
    pub logp: f64,
    pub lp: f64,
    pub cp: f64,
    pub rs: f64,
}

impl ScoreTerms {
    pub fn total(&self) -> f64 {
        self.logp / self.lp + self.cp + self.rs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repeat_scorer::SubwordScore;

    fn map(scores: &[(u32, f64)]) -> RepeatScoreMap {
        RepeatScoreMap {
            word_scores: vec![],
            subword_scores: scores
                .iter()
                .enumerate()
                .map(|(i, &(id, score))| SubwordScore { position: i, id, score })
                .collect(),
        }
    }

    #[test]
    fn length_penalty_values() {
        assert_eq!(length_penalty(7, 0.0), 1.0);
        assert_eq!(length_penalty(1, 0.7), 1.0);
        assert!((length_penalty(13, 0.2) - 3f64.powf(0.2)).abs() < 1e-9);
    }

    #[test]
    fn coverage_without_clipping() {
        let att = vec![vec![1.0, 0.25], vec![1.0, 0.25]];
        let c = coverage_penalty(&att, 0.2, 1e-6);
        assert!(c.value.abs() < 1e-12);
        assert!(!c.floored);
        let clipped = clipped_coverage_penalty(&att, 0.2, 1e-6);
        assert!((clipped - 0.2 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn coverage_floor_is_flagged() {
        let c = coverage_penalty(&[vec![1.0, 0.0]], 1.0, 1e-6);
        assert!(c.floored);
        assert!((c.value - 1e-6f64.ln()).abs() < 1e-12);
        assert_eq!(coverage_penalty(&[vec![0.3, 0.7]], 0.0, 1e-6).value, 0.0);
    }

    #[test]
    fn repeat_term_examples() {
        let m = map(&[(10, 0.5), (11, 0.25), (12, 0.25)]);
        assert!(repeat_term(&[10, 11, 12, 1], &m, 1e-6).abs() < 1e-12);
        assert!((repeat_term(&[3, 4], &m, 1e-6) - 1e-6f64.ln()).abs() < 1e-12);
        assert!(repeat_term(&[10, 10], &m, 1e-6).abs() < 1e-12);
    }
}
