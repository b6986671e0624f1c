//! Synthetic pools: uniform features, a smooth random gold utility drawn from
//! random Fourier features of a squared-exponential kernel, and optional
//! priors with an exact target correlation to the gold scores.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{normalize_scores, CandidatePool, GoldScores, PriorPredictions};
use crate::error::{Error, Result};
use crate::numeric::{mean, standardize};

use super::grid::PoolData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Standard deviation of the noise added to the unit-variance utility.
    pub noise: f64,
    /// Length scale of the gold utility as a multiple of `√(d/6)`, the
    /// typical distance between uniform points.
    pub length_scale_factor: f64,
    pub features: usize,
    pub prior_correlation: Option<f64>,
}

impl SynthConfig {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        SynthConfig {
            n,
            d,
            seed,
            noise: 0.05,
            length_scale_factor: 1.0,
            features: 64,
            prior_correlation: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub pool: CandidatePool,
    /// Normalised to [0, 10].
    pub gold: GoldScores,
    pub priors: Option<PriorPredictions>,
}

impl SyntheticData {
    pub fn into_pool_data(self) -> PoolData {
        PoolData {
            pool: Arc::new(self.pool),
            gold: self.gold,
            priors: self.priors,
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SyntheticData> {
    if cfg.n < 2 || cfg.d == 0 {
        return Err(Error::Validation("synthetic pools need n ≥ 2 and d ≥ 1".into()));
    }
    if let Some(rho) = cfg.prior_correlation {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Validation("prior_correlation must lie in [-1, 1]".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows: Vec<Vec<f64>> = (0..cfg.n).map(|_| (0..cfg.d).map(|_| rng.random::<f64>()).collect()).collect();

    let ls = cfg.length_scale_factor * (cfg.d as f64 / 6.0).sqrt();
    let j = cfg.features.max(1);
    let omega_dist = Normal::new(0.0, 1.0 / ls).expect("positive scale");
    let omegas: Vec<Vec<f64>> = (0..j).map(|_| (0..cfg.d).map(|_| rng.sample(omega_dist)).collect()).collect();
    let phases: Vec<f64> = (0..j).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    let amps: Vec<f64> = (0..j).map(|_| rng.sample::<f64, _>(StandardNormal) * (2.0 / j as f64).sqrt()).collect();
    let utility: Vec<f64> = rows
        .iter()
        .map(|x| {
            let f: f64 = (0..j)
                .map(|k| {
                    let dot: f64 = omegas[k].iter().zip(x).map(|(w, v)| w * v).sum();
                    amps[k] * (dot + phases[k]).cos()
                })
                .sum();
            f + cfg.noise * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let gold = normalize_scores(&utility)?;

    let priors = match cfg.prior_correlation {
        None => None,
        Some(rho) => Some(correlated_prior(&gold.scores, rho, &mut rng)?),
    };
    Ok(SyntheticData {
        pool: CandidatePool::from_features(format!("synth-{}", cfg.seed), rows)?,
        gold,
        priors,
    })
}

/// A vector whose sample correlation with `target` is exactly `rho`
/// (up to round-off): Gaussian noise is orthogonalised against the target
/// before mixing.
pub fn correlated_prior<R: Rng + ?Sized>(target: &[f64], rho: f64, rng: &mut R) -> Result<PriorPredictions> {
    let zt = standardize(target);
    let raw: Vec<f64> = (0..target.len()).map(|_| rng.sample(StandardNormal)).collect();
    let m = mean(&raw);
    let centred: Vec<f64> = raw.iter().map(|v| v - m).collect();
    let proj = centred.iter().zip(&zt).map(|(a, b)| a * b).sum::<f64>() / zt.iter().map(|b| b * b).sum::<f64>().max(1e-300);
    let resid: Vec<f64> = centred.iter().zip(&zt).map(|(a, b)| a - proj * b).collect();
    let zn = standardize(&resid);
    let mix = (1.0 - rho * rho).max(0.0).sqrt();
    PriorPredictions::new(zt.iter().zip(&zn).map(|(a, b)| rho * a + mix * b).collect(), format!("synthetic ρ={rho}"))
}
