//! Pair-selection strategies.
//!
//! Every strategy scores unordered pairs so that larger values are better.
//! Ties are broken by lexicographic `(a_id, b_id)` order, except UNC, which
//! ranks candidates individually and breaks ties by id.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gppl::{GpPosterior, PairStatistics};
use crate::numeric::{binary_entropy, logistic, norm_cdf, norm_pdf, BALD_KAPPA_SQ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Unc,
    Unpa,
    Eig,
    Imp,
    Tp,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Random,
        Strategy::Unc,
        Strategy::Unpa,
        Strategy::Eig,
        Strategy::Imp,
        Strategy::Tp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Unc => "unc",
            Strategy::Unpa => "unpa",
            Strategy::Eig => "eig",
            Strategy::Imp => "imp",
            Strategy::Tp => "tp",
        }
    }

    /// Whether scoring needs a posterior covariance.
    pub fn needs_posterior(self) -> bool {
        matches!(self, Strategy::Unpa | Strategy::Eig | Strategy::Imp | Strategy::Tp)
    }

    /// Whether the selected pairs depend on the injected RNG.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Strategy::Random | Strategy::Tp)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionScore {
    pub pair: (usize, usize),
    pub value: f64,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    /// Above this many candidates, the all-pairs strategies (UNPA, EIG) score
    /// pairs within a uniform random subset of this size. `None` scores every pair.
    pub pair_cap: Option<usize>,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig { pair_cap: Some(1000) }
    }
}

/// What the current learner exposes to the acquisition step.
#[derive(Debug, Clone, Copy)]
pub enum ModelView<'a> {
    /// Point utilities only (Bradley–Terry).
    Utilities(&'a [f64]),
    Posterior(&'a GpPosterior),
}

impl<'a> ModelView<'a> {
    pub fn len(&self) -> usize {
        match self {
            ModelView::Utilities(u) => u.len(),
            ModelView::Posterior(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn utilities(&self) -> &'a [f64] {
        match self {
            ModelView::Utilities(u) => u,
            ModelView::Posterior(p) => p.mean(),
        }
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn check_pool_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Validation("pool must contain ≥ 2 candidates".into()));
    }
    Ok(())
}

/// Uniformly random unordered pair of distinct ids, returned as `(low, high)`.
pub fn acq_random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<(usize, usize)> {
    check_pool_size(n)?;
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    Ok(ordered(a, b))
}

/// `u(a) = min(σ(f_a), 1 − σ(f_a))`.
pub fn unc_value(f: f64) -> f64 {
    logistic(-f.abs())
}

/// Candidate ids ordered by decreasing `u`, ties by id.
fn unc_order(utilities: &[f64]) -> Vec<usize> {
    let u: Vec<f64> = utilities.iter().map(|&f| unc_value(f)).collect();
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
    order
}

/// The two candidates with the largest single-item uncertainty.
pub fn acq_unc(utilities: &[f64]) -> Result<(usize, usize)> {
    check_pool_size(utilities.len())?;
    let order = unc_order(utilities);
    Ok((order[0], order[1]))
}

/// BALD information gain of a pair label in nats, using the Gaussian
/// approximation of `h(Φ(x))` for the expected conditional entropy.
/// Clamped at zero, where the approximation can dip by ~1e-3 when `v ≈ 0`.
pub fn eig_value(delta: f64, v: f64) -> f64 {
    let v = v.max(0.0);
    let first = binary_entropy(norm_cdf(delta / (1.0 + v).sqrt()));
    let s = v + BALD_KAPPA_SQ;
    let second = std::f64::consts::LN_2 * (BALD_KAPPA_SQ / s).sqrt() * (-delta * delta / (2.0 * s)).exp();
    (first - second).max(0.0)
}

/// UNPA score `min(p, 1 − p)` with `p` the predictive label probability.
pub fn unpa_value(delta: f64, v: f64) -> f64 {
    let p = norm_cdf(delta / (1.0 + v.max(0.0)).sqrt());
    p.min(1.0 - p)
}

/// Expected improvement `√v (z Φ(z) + φ(z))` of a candidate over the incumbent.
pub fn imp_value(s: &PairStatistics) -> f64 {
    if s.v <= 0.0 {
        return 0.0;
    }
    (s.delta * norm_cdf(s.z) + s.v.sqrt() * norm_pdf(s.z)).max(0.0)
}

/// Scores every pair within `ids` and returns them best first.
fn score_all_pairs(post: &GpPosterior, ids: &[usize], f: impl Fn(&PairStatistics) -> f64 + Sync, strategy: Strategy) -> Vec<AcquisitionScore> {
    use rayon::prelude::*;
    let mut scores: Vec<AcquisitionScore> = ids
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, &a)| {
            let f = &f;
            ids[i + 1..].iter().map(move |&b| {
                let (a, b) = ordered(a, b);
                AcquisitionScore {
                    pair: (a, b),
                    value: f(&post.pair_stats(a, b)),
                    strategy,
                }
            })
        })
        .collect();
    scores.sort_by(|x, y| y.value.total_cmp(&x.value).then(x.pair.cmp(&y.pair)));
    scores
}

fn best_pair(post: &GpPosterior, f: impl Fn(&PairStatistics) -> f64) -> Result<(usize, usize)> {
    let n = post.len();
    check_pool_size(n)?;
    let mut best = ((0, 1), f64::NEG_INFINITY);
    for a in 0..n {
        for b in a + 1..n {
            let v = f(&post.pair_stats(a, b));
            if v > best.1 {
                best = ((a, b), v);
            }
        }
    }
    Ok(best.0)
}

/// Pair whose predicted label probability is closest to 0.5.
pub fn acq_unpa(post: &GpPosterior) -> Result<(usize, usize)> {
    best_pair(post, |s| unpa_value(s.delta, s.v))
}

/// Pair with the largest expected information gain.
pub fn acq_eig(post: &GpPosterior) -> Result<(usize, usize)> {
    best_pair(post, |s| eig_value(s.delta, s.v))
}

/// Ids ordered by decreasing posterior mean, ties by id.
fn mean_order(f: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    order
}

/// Partners of `anchor` ranked best first by `score`, ties by id.
fn ranked_partners(post: &GpPosterior, anchor: usize, score: impl Fn(&PairStatistics) -> f64) -> Vec<(usize, f64)> {
    let mut partners: Vec<(usize, f64)> = post
        .anchor_stats(anchor)
        .iter()
        .enumerate()
        .filter(|&(a, _)| a != anchor)
        .map(|(a, s)| (a, score(s)))
        .collect();
    partners.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    partners
}

/// `(b*, a)` with `b*` the incumbent and `a` its partner of largest expected improvement.
pub fn acq_imp(post: &GpPosterior) -> Result<(usize, usize)> {
    check_pool_size(post.len())?;
    let incumbent = mean_order(post.mean())[0];
    let best = ranked_partners(post, incumbent, imp_value)[0].0;
    Ok((incumbent, best))
}

/// Index of the maximum of one posterior draw.
pub fn thompson_draw<R: Rng + ?Sized>(post: &GpPosterior, rng: &mut R) -> Result<usize> {
    let f = post.sample(rng)?;
    crate::numeric::argmax(&f).ok_or_else(|| Error::Validation("empty posterior".into()))
}

/// `(b, a)` with `b` the argmax of a posterior draw and `a` its most informative partner.
pub fn acq_tp<R: Rng + ?Sized>(post: &GpPosterior, rng: &mut R) -> Result<(usize, usize)> {
    check_pool_size(post.len())?;
    let b = thompson_draw(post, rng)?;
    let a = ranked_partners(post, b, |s| eig_value(s.delta, s.v))[0].0;
    Ok((b, a))
}

/// Selects up to `batch_size` distinct unordered pairs.
///
/// All-pairs strategies take the top of their score list. IMP takes the best
/// unused partners of the incumbent, then of the next-best candidates by
/// posterior mean once the incumbent's pairs run out. TP redraws for every
/// pair, moving down the draw's order when the sampled best is exhausted.
pub fn select_batch<R: Rng + ?Sized>(
    strategy: Strategy,
    view: ModelView<'_>,
    batch_size: usize,
    cfg: &AcquisitionConfig,
    rng: &mut R,
) -> Result<Vec<AcquisitionScore>> {
    let n = view.len();
    check_pool_size(n)?;
    if batch_size == 0 {
        return Err(Error::Validation("batch_size must be ≥ 1".into()));
    }
    let total = n * (n - 1) / 2;
    let want = batch_size.min(total);
    let post = match (strategy.needs_posterior(), view) {
        (true, ModelView::Posterior(p)) => Some(p),
        (true, ModelView::Utilities(_)) => {
            return Err(Error::IncompatibleStrategy {
                strategy: strategy.name(),
                learner: "bt",
            })
        }
        (false, _) => None,
    };
    let mut used: HashSet<(usize, usize)> = HashSet::with_capacity(want);
    let mut out = Vec::with_capacity(want);
    let mut push = |pair: (usize, usize), value: f64, out: &mut Vec<AcquisitionScore>| {
        if used.insert(ordered(pair.0, pair.1)) {
            out.push(AcquisitionScore { pair, value, strategy });
            true
        } else {
            false
        }
    };

    match strategy {
        Strategy::Random => {
            if want * 4 >= total {
                let all: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
                for i in sample(rng, total, want) {
                    push(all[i], 0.0, &mut out);
                }
            } else {
                while out.len() < want {
                    let p = acq_random(n, rng)?;
                    push(p, 0.0, &mut out);
                }
            }
        }
        Strategy::Unc => {
            let u = view.utilities();
            let order = unc_order(u);
            'outer: for j in 1..n {
                for i in 0..j {
                    if out.len() == want {
                        break 'outer;
                    }
                    let (a, b) = (order[i], order[j]);
                    push((a, b), unc_value(u[b]), &mut out);
                }
            }
        }
        Strategy::Unpa | Strategy::Eig => {
            let post = post.expect("checked above");
            let ids: Vec<usize> = match cfg.pair_cap {
                Some(cap) if n > cap && cap >= 2 => {
                    let mut ids = sample(rng, n, cap).into_vec();
                    ids.sort_unstable();
                    ids
                }
                _ => (0..n).collect(),
            };
            let scores = if strategy == Strategy::Unpa {
                score_all_pairs(post, &ids, |s| unpa_value(s.delta, s.v), strategy)
            } else {
                score_all_pairs(post, &ids, |s| eig_value(s.delta, s.v), strategy)
            };
            for s in scores.into_iter().take(want) {
                push(s.pair, s.value, &mut out);
            }
        }
        Strategy::Imp => {
            let post = post.expect("checked above");
            'anchors: for anchor in mean_order(post.mean()) {
                for (a, v) in ranked_partners(post, anchor, imp_value) {
                    if out.len() == want {
                        break 'anchors;
                    }
                    push((anchor, a), v, &mut out);
                }
            }
        }
        Strategy::Tp => {
            let post = post.expect("checked above");
            while out.len() < want {
                let draw = post.sample(rng)?;
                let mut chosen = false;
                for anchor in mean_order(&draw) {
                    for (a, v) in ranked_partners(post, anchor, |s| eig_value(s.delta, s.v)) {
                        if push((anchor, a), v, &mut out) {
                            chosen = true;
                            break;
                        }
                    }
                    if chosen {
                        break;
                    }
                }
            }
        }
    }
    Ok(out)
}
