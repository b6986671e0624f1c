//! Simulated noisy user: prefers `a` over `b` with probability
//! `σ((g_a − g_b) / t)` given gold scores `g` and temperature `t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{GoldScores, LabelSource, PreferenceRecord};
use crate::error::{Error, Result};
use crate::numeric::logistic_exact_complement;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub t: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { t: 0.3, seed: 0 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::Validation("oracle temperature t must be positive".into()));
        }
        Ok(())
    }
}

pub fn oracle_prob(g_a: f64, g_b: f64, t: f64) -> f64 {
    logistic_exact_complement((g_a - g_b) / t)
}

/// Queries the oracle on `pair`. The two candidates are presented in random
/// order; the record stores them in presentation order.
pub fn oracle_label<R: Rng + ?Sized>(pair: (usize, usize), gold: &GoldScores, t: f64, rng: &mut R) -> Result<PreferenceRecord> {
    let (x, y) = pair;
    let n = gold.len();
    if x >= n || y >= n || x == y {
        return Err(Error::Validation(format!("invalid oracle pair ({x}, {y})")));
    }
    let (a, b) = if rng.random::<bool>() { (x, y) } else { (y, x) };
    let p = oracle_prob(gold.scores[a], gold.scores[b], t);
    let label = rng.random::<f64>() < p;
    Ok(PreferenceRecord {
        a_id: a,
        b_id: b,
        label,
        source: LabelSource::Simulated,
        iteration: 0,
    })
}

/// Agreement of a label with the gold ordering; ties earn half credit.
fn agreement(record: &PreferenceRecord, gold: &GoldScores) -> f64 {
    let ga = gold.scores[record.a_id];
    let gb = gold.scores[record.b_id];
    if ga == gb {
        0.5
    } else if (ga > gb) == record.label {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleAccuracy {
    pub monte_carlo: f64,
    /// `E[max(p, 1 − p)]` over the same sampled pairs.
    pub analytic: f64,
}

/// Estimates how often oracle labels agree with the gold ordering for pairs
/// drawn by `pair_sampler`.
pub fn oracle_accuracy<R, F>(gold: &GoldScores, t: f64, mut pair_sampler: F, n_draws: usize, rng: &mut R) -> Result<OracleAccuracy>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> (usize, usize),
{
    if n_draws == 0 {
        return Err(Error::Validation("n_draws must be ≥ 1".into()));
    }
    let mut mc = 0.0;
    let mut analytic = 0.0;
    for _ in 0..n_draws {
        let pair = pair_sampler(rng);
        let rec = oracle_label(pair, gold, t, rng)?;
        mc += agreement(&rec, gold);
        let (ga, gb) = (gold.scores[pair.0], gold.scores[pair.1]);
        analytic += if ga == gb {
            0.5
        } else {
            let p = oracle_prob(ga, gb, t);
            p.max(1.0 - p)
        };
    }
    Ok(OracleAccuracy {
        monte_carlo: mc / n_draws as f64,
        analytic: analytic / n_draws as f64,
    })
}

/// Exact expected accuracy under uniformly random distinct pairs.
pub fn oracle_accuracy_all_pairs(gold: &GoldScores, t: f64) -> f64 {
    let g = &gold.scores;
    let n = g.len();
    let mut total = 0.0;
    let mut count = 0usize;
    for a in 0..n {
        for b in a + 1..n {
            total += if g[a] == g[b] {
                0.5
            } else {
                let p = oracle_prob(g[a], g[b], t);
                p.max(1.0 - p)
            };
            count += 1;
        }
    }
    if count == 0 {
        0.5
    } else {
        total / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn probability_examples() {
        assert_eq!(oracle_prob(3.0, 3.0, 0.3), 0.5);
        assert!((oracle_prob(1.3, 1.0, 0.3) - 0.73106).abs() < 1e-5);
        assert!((oracle_prob(1.0, 0.0, 0.3) - 0.965_554_804_333_788_9).abs() < 1e-12);
        assert_eq!(oracle_prob(2.0, 7.0, 0.7) + oracle_prob(7.0, 2.0, 0.7), 1.0);
    }

    #[test]
    fn strong_preference_nearly_always_wins() {
        let gold = GoldScores::raw(vec![10.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let wins = (0..10_000)
            .filter(|_| oracle_label((0, 1), &gold, 0.3, &mut rng).unwrap().winner_loser().0 == 0)
            .count();
        assert!(wins as f64 / 1e4 > 0.999);
    }

    #[test]
    fn presentation_order_is_randomised() {
        let gold = GoldScores::raw(vec![1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let first_shown = (0..10_000)
            .filter(|_| oracle_label((0, 1), &gold, 1.0, &mut rng).unwrap().a_id == 0)
            .count();
        assert!((first_shown as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn tied_gold_gives_half_accuracy() {
        let gold = GoldScores::raw(vec![4.0; 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let acc = oracle_accuracy(&gold, 1.0, |_| (1, 3), 100, &mut rng).unwrap();
        assert_eq!(acc.monte_carlo, 0.5);
        assert_eq!(acc.analytic, 0.5);
        assert_eq!(oracle_accuracy_all_pairs(&gold, 1.0), 0.5);
    }

    #[test]
    fn rejects_bad_temperature() {
        assert!(OracleConfig { t: 0.0, seed: 0 }.validate().is_err());
        assert!(OracleConfig::default().validate().is_ok());
    }
}
