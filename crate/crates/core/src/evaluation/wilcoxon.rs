use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::util::mid_ranks;
use crate::{Error, Result};

/// Largest per-sample size for which the exact distribution is used.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    /// Rank sum of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
}

/// Two-sided Wilcoxon rank-sum test.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<SignificanceResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Invalid("both samples must be non-empty".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Numeric("samples must be finite".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = mid_ranks(&pooled);
    let statistic: f64 = ranks[..a.len()].iter().sum();
    let method = if a.len() <= EXACT_LIMIT && b.len() <= EXACT_LIMIT {
        TestMethod::Exact
    } else {
        TestMethod::NormalApproximation
    };
    let first = pooled[0];
    if pooled.iter().all(|&x| x == first) {
        return Ok(SignificanceResult {
            statistic,
            p_value: 1.0,
            method,
        });
    }
    let p_value = match method {
        TestMethod::Exact => exact_p(&ranks, a.len()),
        TestMethod::NormalApproximation => normal_p(&pooled, statistic, a.len(), b.len()),
    };
    Ok(SignificanceResult {
        statistic,
        p_value,
        method,
    })
}

/// Enumerates the permutation distribution of the rank sum of `n1` of the
/// observed (mid-)ranks. Ranks are doubled so ties stay integral.
fn exact_p(ranks: &[f64], n1: usize) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let w: usize = doubled[..n1].iter().sum();
    let max_sum: usize = doubled.iter().sum();
    // ways[j][s]: subsets of size j with doubled sum s
    let mut ways = vec![vec![0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &d in &doubled {
        for j in (1..=n1).rev() {
            for s in (d..=max_sum).rev() {
                let add = ways[j - 1][s - d];
                if add != 0.0 {
                    ways[j][s] += add;
                }
            }
        }
    }
    let total: f64 = ways[n1].iter().sum();
    let lower: f64 = ways[n1][..=w].iter().sum();
    let upper: f64 = ways[n1][w..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(pooled: &[f64], statistic: f64, n1: usize, n2: usize) -> f64 {
    let n = (n1 + n2) as f64;
    let (n1, n2) = (n1 as f64, n2 as f64);
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    let mean = n1 * (n + 1.0) / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * (1.0 - std_normal.cdf(z))).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_small_case() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 3.0);
        assert_eq!(r.method, TestMethod::Exact);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples() {
        let r = wilcoxon_rank_sum(&[2.0, 2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
        let a = [1.0, 5.0, 3.0];
        assert_eq!(wilcoxon_rank_sum(&a, &a).unwrap().p_value, 1.0);
    }

    #[test]
    fn exact_with_ties_matches_enumeration() {
        let a = [1.0, 2.0, 2.0];
        let b = [2.0, 3.0, 3.0, 4.0];
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        // brute force over all C(7,3) splits of the pooled ranks
        let pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
        let ranks = mid_ranks(&pooled);
        let mut sums = Vec::new();
        for i in 0..7 {
            for j in i + 1..7 {
                for k in j + 1..7 {
                    sums.push(ranks[i] + ranks[j] + ranks[k]);
                }
            }
        }
        let n = sums.len() as f64;
        let lo = sums.iter().filter(|&&s| s <= r.statistic + 1e-9).count() as f64 / n;
        let hi = sums.iter().filter(|&&s| s >= r.statistic - 1e-9).count() as f64 / n;
        assert!((r.p_value - (2.0 * lo.min(hi)).min(1.0)).abs() < 1e-12);
    }

    #[test]
    fn large_samples_use_normal() {
        let a: Vec<f64> = (0..30).map(f64::from).collect();
        let b: Vec<f64> = (100..130).map(f64::from).collect();
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_eq!(r.method, TestMethod::NormalApproximation);
        assert!(r.p_value < 1e-6);
    }
}
