use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use crate::error::{Error, Result};
use crate::numeric::norm_cdf;

/// Floor under `v` when forming `z = Δ / √v`.
pub const Z_EPS: f64 = 1e-12;

/// Mean difference, variance of the difference and standardised gap for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStatistics {
    pub delta: f64,
    pub v: f64,
    pub z: f64,
}

impl PairStatistics {
    /// Builds the statistics, clamping negative `v` (round-off) to zero; `z`
    /// is zero when `v` is exactly zero.
    pub fn new(delta: f64, v: f64) -> Self {
        let v = v.max(0.0);
        let z = if v == 0.0 { 0.0 } else { delta / v.max(Z_EPS).sqrt() };
        PairStatistics { delta, v, z }
    }
}

/// Covariance `K − Q + Ψ S Ψᵀ` of an inducing-point posterior, with `Q = ΨΨᵀ`
/// the Nyström part of the prior. Entries are formed on demand from the kernel.
#[derive(Debug, Clone)]
pub struct FactoredCovariance {
    pub(crate) kernel: Arc<Kernel>,
    pub(crate) features: Arc<Vec<Vec<f64>>>,
    /// Ψ, n × M.
    pub(crate) psi: DMatrix<f64>,
    /// Ψ (S − I), n × M.
    pub(crate) psi_core: DMatrix<f64>,
    /// Posterior covariance factor of the whitened inducing values, S = R Rᵀ.
    pub(crate) s_factor: DMatrix<f64>,
    pub(crate) diag: Vec<f64>,
}

impl FactoredCovariance {
    fn entry(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return self.diag[a];
        }
        let k = self.kernel.eval(&self.features[a], &self.features[b]);
        k + self.psi_core.row(a).dot(&self.psi.row(b))
    }

    /// Prior residual variance not explained by the inducing points.
    fn residual_var(&self, a: usize) -> f64 {
        (self.kernel.prior_var() - self.psi.row(a).norm_squared()).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub enum Covariance {
    Dense(DMatrix<f64>),
    Factored(FactoredCovariance),
}

/// Gaussian posterior `N(f̂, C)` over the utilities of every pool candidate.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    f_hat: Vec<f64>,
    cov: Covariance,
    chol: OnceLock<Option<DMatrix<f64>>>,
}

impl GpPosterior {
    /// A posterior from an explicit mean and dense covariance. The matrix is
    /// symmetrised.
    pub fn dense(f_hat: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = f_hat.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: cov.nrows(),
            });
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        Ok(GpPosterior {
            f_hat,
            cov: Covariance::Dense(sym),
            chol: OnceLock::new(),
        })
    }

    pub(crate) fn factored(f_hat: Vec<f64>, cov: FactoredCovariance) -> Self {
        GpPosterior {
            f_hat,
            cov: Covariance::Factored(cov),
            chol: OnceLock::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.f_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_hat.is_empty()
    }

    /// Posterior mean utilities, indexed by candidate id.
    pub fn mean(&self) -> &[f64] {
        &self.f_hat
    }

    pub fn covariance(&self) -> &Covariance {
        &self.cov
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.cov, Covariance::Dense(_))
    }

    pub fn cov(&self, a: usize, b: usize) -> f64 {
        match &self.cov {
            Covariance::Dense(m) => m[(a, b)],
            Covariance::Factored(f) => f.entry(a, b),
        }
    }

    pub fn var(&self, a: usize) -> f64 {
        self.cov(a, a)
    }

    /// Materialises the full covariance; O(n²) memory.
    pub fn dense_covariance(&self) -> DMatrix<f64> {
        match &self.cov {
            Covariance::Dense(m) => m.clone(),
            Covariance::Factored(_) => {
                let n = self.len();
                DMatrix::from_fn(n, n, |a, b| self.cov(a, b))
            }
        }
    }

    /// `Δ = f̂_a − f̂_b` and `v = C_aa + C_bb − 2 C_ab`.
    pub fn pair_stats(&self, a: usize, b: usize) -> PairStatistics {
        if a == b {
            return PairStatistics::new(0.0, 0.0);
        }
        let v = self.var(a) + self.var(b) - 2.0 * self.cov(a, b);
        PairStatistics::new(self.f_hat[a] - self.f_hat[b], v)
    }

    /// Statistics of every candidate against a fixed anchor in O(n) kernel
    /// evaluations, used by the anchor-based strategies.
    pub fn anchor_stats(&self, anchor: usize) -> Vec<PairStatistics> {
        let n = self.len();
        match &self.cov {
            Covariance::Dense(m) => (0..n)
                .map(|a| {
                    if a == anchor {
                        PairStatistics::new(0.0, 0.0)
                    } else {
                        let v = m[(a, a)] + m[(anchor, anchor)] - 2.0 * m[(a, anchor)];
                        PairStatistics::new(self.f_hat[a] - self.f_hat[anchor], v)
                    }
                })
                .collect(),
            Covariance::Factored(f) => {
                let core_b = f.psi_core.row(anchor);
                let fb = &f.features[anchor];
                (0..n)
                    .map(|a| {
                        if a == anchor {
                            return PairStatistics::new(0.0, 0.0);
                        }
                        let cab = f.kernel.eval(&f.features[a], fb) + f.psi.row(a).dot(&core_b);
                        let v = f.diag[a] + f.diag[anchor] - 2.0 * cab;
                        PairStatistics::new(self.f_hat[a] - self.f_hat[anchor], v)
                    })
                    .collect()
            }
        }
    }

    /// Probit preference probability `Φ(Δ / √(1 + v))`.
    pub fn pair_prob(&self, a: usize, b: usize) -> f64 {
        let s = self.pair_stats(a, b);
        norm_cdf(s.delta / (1.0 + s.v).sqrt())
    }

    /// Draws `f ~ N(f̂, C)`. Dense covariances use a Cholesky factor with
    /// escalating jitter; factored ones use the inducing factor plus an
    /// independent per-candidate residual.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let n = self.len();
        match &self.cov {
            Covariance::Dense(m) => {
                let l = self
                    .chol
                    .get_or_init(|| cholesky_with_jitter(m).ok())
                    .as_ref()
                    .ok_or(Error::NotPositiveDefinite {
                        jitter: max_jitter(m),
                    })?;
                let xi = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let draw = l * xi;
                Ok(self.f_hat.iter().zip(draw.iter()).map(|(m, d)| m + d).collect())
            }
            Covariance::Factored(f) => {
                let mdim = f.s_factor.ncols();
                let xi = DVector::from_iterator(mdim, (0..mdim).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let shared = &f.psi * (&f.s_factor * xi);
                Ok((0..n)
                    .map(|a| {
                        let e: f64 = rng.sample(StandardNormal);
                        self.f_hat[a] + shared[a] + f.residual_var(a).sqrt() * e
                    })
                    .collect())
            }
        }
    }
}

fn max_jitter(m: &DMatrix<f64>) -> f64 {
    let scale = m.diagonal().mean().abs().max(1e-300);
    1e-4 * scale
}

/// Lower Cholesky factor of `m + εI`, escalating ε from 0 through
/// `1e-12·s … 1e-4·s` with `s` the mean diagonal.
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let scale = m.diagonal().mean().abs().max(1e-300);
    let mut jitter = 0.0;
    loop {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        if let Some(ch) = a.cholesky() {
            return Ok(ch.l());
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 10.0 };
        if jitter > max_jitter(m) * 1.0001 {
            return Err(Error::NotPositiveDefinite { jitter: jitter / 10.0 });
        }
    }
}
