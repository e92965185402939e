//! Ranking metrics over positive and negative score sets.
//!
//! Ties are resolved deterministically: AUROC gives half credit to tied
//! positive/negative pairs, AUPRC treats a run of equal scores as a single
//! threshold, and AP@k ranks with a stable descending sort over
//! `positives ++ negatives`.

use std::cmp::Ordering;

use crate::error::{Result, TipError};

fn require_both(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() {
        return Err(TipError::UndefinedMetric("no positive scores"));
    }
    if neg.is_empty() {
        return Err(TipError::UndefinedMetric("no negative scores"));
    }
    Ok(())
}

/// `(score, is_positive)` pairs sorted by descending score, stable.
fn ranked(pos: &[f64], neg: &[f64]) -> Vec<(f64, bool)> {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    all
}

/// Consecutive equal-score groups of a ranked list, as `(positives, negatives)`.
fn tie_groups(ranked: &[(f64, bool)]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < ranked.len() {
        let mut j = i;
        let (mut p, mut n) = (0, 0);
        while j < ranked.len() && ranked[j].0.total_cmp(&ranked[i].0) == Ordering::Equal {
            if ranked[j].1 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        groups.push((p, n));
        i = j;
    }
    groups
}

/// Mann-Whitney form: `P(pos > neg) + ½·P(pos = neg)`.
pub fn auroc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    require_both(pos, neg)?;
    let groups = tie_groups(&ranked(pos, neg));
    // Walk from the highest score down, counting negatives below each group.
    let mut neg_remaining = neg.len() as f64;
    let mut credit = 0.0;
    for (p, n) in groups {
        let (p, n) = (p as f64, n as f64);
        neg_remaining -= n;
        credit += p * neg_remaining + 0.5 * p * n;
    }
    Ok(credit / (pos.len() as f64 * neg.len() as f64))
}

/// Step-wise area under the precision-recall curve: `Σ_k (R_k − R_{k−1})·P_k`
/// over descending thresholds.
pub fn auprc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    require_both(pos, neg)?;
    let total_pos = pos.len() as f64;
    let (mut tp, mut fp) = (0.0, 0.0);
    // Recall steps are `p / total_pos`; dividing once at the end keeps the
    // result within [0, 1] under rounding.
    let mut weighted = 0.0;
    for (p, n) in tie_groups(&ranked(pos, neg)) {
        tp += p as f64;
        fp += n as f64;
        if p > 0 {
            weighted += p as f64 * (tp / (tp + fp));
        }
    }
    Ok(weighted / total_pos)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApAtK {
    pub value: f64,
    /// Fewer than `k` scored pairs were available.
    pub truncated: bool,
}

/// Average precision over the `k` highest-scored pairs: the mean of
/// precision@j over the hit positions `j ≤ k`, zero when there are no hits.
pub fn ap_at_k(pos: &[f64], neg: &[f64], k: usize) -> Result<ApAtK> {
    if k == 0 {
        return Err(TipError::Contract("AP@k needs k >= 1".into()));
    }
    let ranked = ranked(pos, neg);
    let truncated = ranked.len() < k;
    let (mut hits, mut sum) = (0usize, 0.0);
    for (j, &(_, is_pos)) in ranked.iter().take(k).enumerate() {
        if is_pos {
            hits += 1;
            sum += hits as f64 / (j + 1) as f64;
        }
    }
    let value = if hits == 0 { 0.0 } else { sum / hits as f64 };
    Ok(ApAtK { value, truncated })
}
