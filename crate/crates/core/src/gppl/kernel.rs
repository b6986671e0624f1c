use serde::{Deserialize, Serialize};

use crate::domain::CandidatePool;
use crate::error::{Error, Result};
use crate::numeric::median;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern52,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthScale {
    /// Median pairwise Euclidean distance between candidates.
    Median,
    Scalar(f64),
    PerDim(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub length_scale: LengthScale,
    pub signal_variance: f64,
    /// Added to the prior variance of every candidate.
    pub jitter: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            family: KernelFamily::Matern52,
            length_scale: LengthScale::Median,
            signal_variance: 1.0,
            jitter: 1e-6,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::Validation("signal_variance must be positive".into()));
        }
        if !(self.jitter > 0.0) || self.jitter > 1e-4 * self.signal_variance {
            return Err(Error::Validation(
                "jitter must be positive and at most 1e-4 × signal_variance".into(),
            ));
        }
        let ok = match &self.length_scale {
            LengthScale::Median => true,
            LengthScale::Scalar(l) => *l > 0.0 && l.is_finite(),
            LengthScale::PerDim(v) => v.iter().all(|l| *l > 0.0 && l.is_finite()),
        };
        if !ok {
            return Err(Error::Validation("length scales must be positive".into()));
        }
        Ok(())
    }

    /// Fixes the length scales against a pool's features.
    pub fn resolve(&self, pool: &CandidatePool) -> Result<Kernel> {
        self.validate()?;
        let d = pool.feature_dim;
        let inv_ls = match &self.length_scale {
            LengthScale::Median => vec![1.0 / median_distance(pool); d],
            LengthScale::Scalar(l) => vec![1.0 / l; d],
            LengthScale::PerDim(v) => {
                if v.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: v.len(),
                    });
                }
                v.iter().map(|l| 1.0 / l).collect()
            }
        };
        Ok(Kernel {
            family: self.family,
            inv_ls,
            signal_variance: self.signal_variance,
            jitter: self.jitter,
        })
    }
}

/// Median pairwise distance over at most 500 evenly strided candidates;
/// falls back to 1 when every sampled pair coincides.
pub fn median_distance(pool: &CandidatePool) -> f64 {
    let n = pool.len();
    let stride = n.div_ceil(500).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut dists = Vec::with_capacity(idx.len() * idx.len() / 2);
    for (i, &a) in idx.iter().enumerate() {
        for &b in &idx[i + 1..] {
            let fa = pool.features(a);
            let fb = pool.features(b);
            dists.push(fa.iter().zip(fb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    let m = median(&mut dists);
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

/// A kernel with resolved length scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub family: KernelFamily,
    pub inv_ls: Vec<f64>,
    pub signal_variance: f64,
    pub jitter: f64,
}

impl Kernel {
    /// Covariance between two feature vectors, without jitter.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(y)
            .zip(&self.inv_ls)
            .map(|((a, b), il)| {
                let t = (a - b) * il;
                t * t
            })
            .sum();
        match self.family {
            KernelFamily::SquaredExponential => self.signal_variance * (-0.5 * r2).exp(),
            KernelFamily::Matern52 => {
                let s5r = (5.0 * r2).sqrt();
                self.signal_variance * (1.0 + s5r + 5.0 * r2 / 3.0) * (-s5r).exp()
            }
        }
    }

    /// Prior variance of a single candidate, jitter included.
    pub fn prior_var(&self) -> f64 {
        self.signal_variance + self.jitter
    }
}
