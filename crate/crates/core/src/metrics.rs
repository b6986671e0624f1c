//! Ranking metrics. Predicted-score ties are broken by candidate id.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{argmax, mean};

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// Ids sorted by descending score, ties by ascending id.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// 1 when the predicted and gold argmax coincide, else 0.
pub fn top1_accuracy(predicted: &[f64], gold: &[f64]) -> Result<f64> {
    same_len(gold.len(), predicted.len())?;
    if gold.is_empty() {
        return Err(Error::Validation("cannot score an empty ranking".into()));
    }
    Ok(if argmax(predicted) == argmax(gold) { 1.0 } else { 0.0 })
}

fn dcg(rels: impl Iterator<Item = f64>) -> f64 {
    rels.enumerate().map(|(i, r)| r / ((i + 2) as f64).log2()).sum()
}

/// NDCG over the top `k` of the predicted order with linear gains. An
/// all-zero relevance vector scores 1.
pub fn ndcg_at_k(predicted: &[f64], relevance: &[f64], k: usize) -> Result<f64> {
    same_len(relevance.len(), predicted.len())?;
    let n = relevance.len();
    if k == 0 || k > n {
        return Err(Error::Validation(format!("k = {k} outside 1..={n}")));
    }
    if relevance.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Error::Validation("relevance must be finite and nonnegative".into()));
    }
    let mut ideal = relevance.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(ideal.into_iter().take(k));
    if idcg == 0.0 {
        return Ok(1.0);
    }
    let order = rank_order(predicted);
    Ok(dcg(order.into_iter().take(k).map(|i| relevance[i])) / idcg)
}

/// The `k` used by [`ndcg_at_percent`]: `ceil(pct · n / 100)`, at least 1.
pub fn percent_cutoff(n: usize, pct: f64) -> usize {
    let k = (pct * n as f64 / 100.0 - 1e-9).ceil();
    (k.max(1.0) as usize).min(n)
}

pub fn ndcg_at_percent(predicted: &[f64], relevance: &[f64], pct: f64) -> Result<f64> {
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::Validation(format!("percentage {pct} outside (0, 100]")));
    }
    ndcg_at_k(predicted, relevance, percent_cutoff(relevance.len(), pct))
}

/// Product-moment correlation; 0 when either input has zero variance.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    same_len(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::Validation("pearson_r needs at least two points".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingEvaluation {
    pub accuracy: f64,
    pub ndcg_at_k: f64,
    pub k: usize,
    pub pearson_r: f64,
}

/// Scores predicted utilities against gold scores, which double as relevance.
pub fn evaluate(predicted: &[f64], gold: &[f64], k: usize) -> Result<RankingEvaluation> {
    let k = k.min(gold.len()).max(1);
    Ok(RankingEvaluation {
        accuracy: top1_accuracy(predicted, gold)?,
        ndcg_at_k: ndcg_at_k(predicted, gold, k)?,
        k,
        pearson_r: pearson_r(predicted, gold)?,
    })
}
