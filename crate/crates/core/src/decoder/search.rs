use std::cmp::Ordering;

use super::terms::{coverage_penalty, length_penalty, repeat_term, ScoreTerms};
use super::{Hypothesis, RsmParams};
use crate::repeat_scorer::RepeatScoreMap;
use crate::seq2seq::GenerativeModel;
use crate::{Error, Result};

/// Scores closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

const ENUMERATION_LIMIT: f64 = 1e6;

fn terms_for(h: &Hypothesis, map: &RepeatScoreMap, params: &RsmParams) -> (ScoreTerms, bool) {
    let ab = params.ablation;
    let lp = if ab.lp {
        length_penalty(h.tokens.len().max(1), params.alpha)
    } else {
        1.0
    };
    let (cp, floored) = if ab.cp && !h.attention.is_empty() {
        let c = coverage_penalty(&h.attention, params.beta, params.rs_floor);
        (c.value, c.floored)
    } else {
        (0.0, false)
    };
    let rs = if ab.rs {
        repeat_term(&h.tokens, map, params.rs_floor)
    } else {
        0.0
    };
    (
        ScoreTerms {
            logp: h.log_prob,
            lp,
            cp,
            rs,
        },
        floored,
    )
}

/// Final score of a finished hypothesis.
pub fn rsm_score(h: &Hypothesis, map: &RepeatScoreMap, params: &RsmParams) -> f64 {
    debug_assert!(h.finished);
    terms_for(h, map, params).0.total()
}

fn finalize(mut h: Hypothesis, map: &RepeatScoreMap, params: &RsmParams) -> Hypothesis {
    let (terms, floored) = terms_for(&h, map, params);
    h.final_score = Some(terms.total());
    h.terms = Some(terms);
    h.coverage_floored = floored;
    h
}

fn by_key_then_ids(a: (f64, &[u32]), b: (f64, &[u32])) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

fn sort_with_ties<T>(items: &mut [T], key: impl Fn(&T) -> (f64, &[u32])) {
    items.sort_by(|a, b| by_key_then_ids(key(a), key(b)));
    let mut start = 0;
    while start < items.len() {
        let head = key(&items[start]).0;
        let mut end = start + 1;
        while end < items.len() && (head - key(&items[end]).0).abs() <= TIE_TOLERANCE {
            end += 1;
        }
        items[start..end].sort_by(|a, b| key(a).1.cmp(key(b).1));
        start = end;
    }
}

/// Sorts scored hypotheses by descending final score; near-ties go to the
/// lexicographically smaller id sequence.
pub fn rank_hypotheses(mut hyps: Vec<Hypothesis>) -> Vec<Hypothesis> {
    sort_with_ties(&mut hyps, |h| (h.final_score.unwrap_or(f64::NEG_INFINITY), &h.tokens));
    hyps
}

fn expand(
    model: &dyn GenerativeModel,
    source: &[u32],
    h: &Hypothesis,
    max_len: usize,
) -> Result<Vec<Hypothesis>> {
    let out = model.step(source, &h.tokens).map_err(|e| Error::Step {
        prefix: h.tokens.clone(),
        source: Box::new(e),
    })?;
    let eos = model.eos_id();
    let mut next = Vec::new();
    for (id, &lp) in out.log_probs.iter().enumerate() {
        if !lp.is_finite() {
            continue;
        }
        let id = id as u32;
        let mut tokens = h.tokens.clone();
        tokens.push(id);
        let mut attention = h.attention.clone();
        if let Some(row) = &out.attention {
            attention.push(row.clone());
        }
        let finished = id == eos || tokens.len() >= max_len;
        next.push(Hypothesis {
            tokens,
            log_prob: h.log_prob + lp,
            attention,
            finished,
            final_score: None,
            terms: None,
            coverage_floored: false,
        });
    }
    Ok(next)
}

/// Beam search. Partial hypotheses are pruned by cumulative log-probability
/// (or by the rescoring function when `per_step` is set); finished ones
/// move to a pool that is ranked by [`rsm_score`] at the end.
pub fn beam_search(
    model: &dyn GenerativeModel,
    source: &[u32],
    map: &RepeatScoreMap,
    params: &RsmParams,
) -> Result<Vec<Hypothesis>> {
    params.check()?;
    let max_len = params.max_length_for(source.len(), model.max_target_len());
    let mut live = vec![Hypothesis::empty()];
    let mut pool = Vec::new();
    while !live.is_empty() {
        let mut cands = Vec::new();
        for h in &live {
            cands.extend(expand(model, source, h, max_len)?);
        }
        let mut keyed: Vec<(f64, Hypothesis)> = cands
            .into_iter()
            .map(|h| {
                let key = if params.per_step {
                    terms_for(&h, map, params).0.total()
                } else {
                    h.log_prob
                };
                (key, h)
            })
            .collect();
        sort_with_ties(&mut keyed, |(k, h)| (*k, &h.tokens));
        keyed.truncate(params.beam_size);
        live = Vec::new();
        for (_, h) in keyed {
            if h.finished {
                pool.push(h);
            } else {
                live.push(h);
            }
        }
    }
    let scored = pool.into_iter().map(|h| finalize(h, map, params)).collect();
    Ok(rank_hypotheses(scored))
}

/// Exhaustive search over every complete sequence: ends with EOS within
/// the length bound, or reaches the bound. Zero-probability continuations
/// are skipped.
pub fn brute_force_best(
    model: &dyn GenerativeModel,
    source: &[u32],
    map: &RepeatScoreMap,
    params: &RsmParams,
) -> Result<Hypothesis> {
    params.check()?;
    let max_len = params.max_length_for(source.len(), model.max_target_len());
    let space = (model.vocab_size() as f64).powi(max_len as i32);
    if space > ENUMERATION_LIMIT {
        return Err(Error::Enumeration(format!(
            "K^max_length = {}^{} exceeds {}",
            model.vocab_size(),
            max_len,
            ENUMERATION_LIMIT
        )));
    }
    let mut complete = Vec::new();
    let mut stack = vec![Hypothesis::empty()];
    while let Some(h) = stack.pop() {
        for next in expand(model, source, &h, max_len)? {
            if next.finished {
                complete.push(finalize(next, map, params));
            } else {
                stack.push(next);
            }
        }
    }
    rank_hypotheses(complete)
        .into_iter()
        .next()
        .ok_or_else(|| Error::Enumeration("no complete sequence has positive probability".into()))
}
