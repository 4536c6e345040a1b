//! Training targets and loss: one-hot, label smoothing (LS) and weighted
//! label smoothing (WLS).
//!
//! For target index `t`, vocabulary size `K` and smoothing weight `eps`:
//!
//! * one-hot: `q_k = [k = t]`
//! * LS:      `q_k = (1 - eps) [k = t] + eps / K`
//! * WLS:     `q_k = (1 - eps) [k = t] + eps r_k^gamma / K`
//!
//! WLS targets are left unnormalized (`sum q <= 1`) unless
//! [`Smoothing::renormalize`] is set. `0^0` is taken as `1`, so `gamma = 0`
//! reproduces LS exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    OneHot,
    #[serde(rename = "ls")]
    LabelSmoothing,
    #[serde(rename = "wls")]
    Weighted,
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMode::OneHot => "one-hot",
            LossMode::LabelSmoothing => "ls",
            LossMode::Weighted => "wls",
        })
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-hot" | "onehot" => Ok(LossMode::OneHot),
            "ls" => Ok(LossMode::LabelSmoothing),
            "wls" => Ok(LossMode::Weighted),
            other => Err(Error::Param(format!("unknown loss mode `{other}`"))),
        }
    }
}

/// Loss configuration. Defaults: `eps = 0.1`, `gamma = 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub mode: LossMode,
    pub epsilon: f64,
    pub gamma: f64,
    /// Divide WLS targets by their sum. Off by default.
    #[serde(default)]
    pub renormalize: bool,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing {
            mode: LossMode::Weighted,
            epsilon: 0.1,
            gamma: 4.0,
            renormalize: false,
        }
    }
}

impl Smoothing {
    pub fn new(mode: LossMode, epsilon: f64, gamma: f64) -> Self {
        Smoothing {
            mode,
            epsilon,
            gamma,
            renormalize: false,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Param(format!(
                "epsilon must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::Param(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Repeat scores mapped into vocabulary space. Non-zero only at subwords
/// that occur inside content words of the source utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatWeightVector {
    r: Vec<f64>,
}

impl RepeatWeightVector {
    pub fn zeros(k: usize) -> Self {
        RepeatWeightVector { r: vec![0.0; k] }
    }

    /// Builds the vector from `(vocabulary id, score)` pairs. A subword that
    /// occurs in several content words keeps the largest score.
    pub fn from_scores(k: usize, scores: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut r = vec![0.0; k];
        for (id, s) in scores {
            let slot = r
                .get_mut(id as usize)
                .ok_or_else(|| Error::Param(format!("subword id {id} outside vocabulary of {k}")))?;
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Param(format!("repeat score {s} outside [0, 1]")));
            }
            *slot = f64::max(*slot, s);
        }
        Ok(RepeatWeightVector { r })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.r
    }
}

/// `r^gamma` with `0^0 = 1`.
fn weight_pow(r: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else {
        r.powf(gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    pub q: Vec<f64>,
    pub mode: LossMode,
    pub epsilon: f64,
    pub gamma: f64,
    pub target_index: usize,
}

impl TargetDistribution {
    pub fn mass(&self) -> f64 {
        self.q.iter().sum()
    }
}

pub fn build_target_distribution(
    smoothing: &Smoothing,
    target_index: usize,
    k: usize,
    r: &RepeatWeightVector,
) -> Result<TargetDistribution> {
    smoothing.check()?;
    if target_index >= k {
        return Err(Error::Param(format!(
            "target index {target_index} outside vocabulary of {k}"
        )));
    }
    let eps = smoothing.epsilon;
    let kf = k as f64;
    let mut q = match smoothing.mode {
        LossMode::OneHot => {
            let mut q = vec![0.0; k];
            q[target_index] = 1.0;
            q
        }
        LossMode::LabelSmoothing => (0..k)
            .map(|i| smoothed_entry(i == target_index, eps, 1.0, kf))
            .collect(),
        LossMode::Weighted => {
            if r.len() != k {
                return Err(Error::Param(format!(
                    "repeat weight vector has length {}, vocabulary has {k}",
                    r.len()
                )));
            }
            r.as_slice()
                .iter()
                .enumerate()
                .map(|(i, &ri)| {
                    smoothed_entry(i == target_index, eps, weight_pow(ri, smoothing.gamma), kf)
                })
                .collect()
        }
    };
    if smoothing.renormalize && smoothing.mode == LossMode::Weighted {
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|x| *x /= s);
    }
    Ok(TargetDistribution {
        q,
        mode: smoothing.mode,
        epsilon: eps,
        gamma: smoothing.gamma,
        target_index,
    })
}

// Shared by LS and WLS so that gamma = 0 gives bit-identical entries.
#[inline]
fn smoothed_entry(is_target: bool, eps: f64, weight: f64, k: f64) -> f64 {
    let hot = if is_target { 1.0 - eps } else { 0.0 };
    hot + eps * weight / k
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// `-sum_k q_k log p_k` for one time step.
pub fn step_loss(logits: &[f64], q: &TargetDistribution) -> f64 {
    let lp = log_softmax(logits);
    -q.q.iter().zip(&lp).map(|(qk, lk)| qk * lk).sum::<f64>()
}

/// Mean over time steps of the per-step cross-entropy against the targets
/// built by `smoothing`. `logits` holds `T` rows of length `K`.
pub fn wls_loss(
    logits: &[Vec<f64>],
    targets: &[usize],
    r: &RepeatWeightVector,
    smoothing: &Smoothing,
) -> Result<f64> {
    if logits.is_empty() || logits.len() != targets.len() {
        return Err(Error::Param(format!(
            "need T >= 1 logit rows matching targets, got {} rows and {} targets",
            logits.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (row, &t) in logits.iter().zip(targets) {
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite logits".into()));
        }
        let q = build_target_distribution(smoothing, t, row.len(), r)?;
        total += step_loss(row, &q);
    }
    Ok(total / logits.len() as f64)
}

/// Gradient of [`step_loss`] with respect to the logits: `s p - q`, where
/// `p = softmax(logits)` and `s = sum q`.
pub fn loss_gradient(logits: &[f64], q: &TargetDistribution) -> Vec<f64> {
    let s = q.mass();
    softmax(logits)
        .into_iter()
        .zip(&q.q)
        .map(|(p, qk)| s * p - qk)
        .collect()
}
