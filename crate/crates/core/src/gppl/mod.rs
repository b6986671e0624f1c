//! Gaussian-process preference learning with a probit pairwise likelihood
//! `p(a ≻ b | f) = Φ(f_a − f_b)`.
//!
//! Small pools use expectation propagation on the exact Gram matrix. Large
//! pools, or any pool when an inducing count is set, use a whitened
//! inducing-point variational posterior.

mod ep;
pub mod kernel;
mod posterior;
mod sparse;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kernel::{Kernel, KernelConfig, KernelFamily, LengthScale};
pub use posterior::{cholesky_with_jitter, Covariance, FactoredCovariance, GpPosterior, PairStatistics, Z_EPS};
pub use sparse::kmeans_pp;

use crate::domain::{CandidatePool, PriorPredictions, TrainingSet};
use crate::error::{Error, Result};
use crate::numeric::standardize;

/// Pools larger than this switch to the inducing-point approximation.
pub const DEFAULT_DENSE_LIMIT: usize = 2000;
pub const DEFAULT_INDUCING: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpplModel {
    pub kernel: KernelConfig,
    /// Prior mean of the utilities; zero when absent.
    pub prior_mean: Option<PriorPredictions>,
    /// Number of inducing points. `None` picks dense inference up to
    /// `dense_limit` candidates and `DEFAULT_INDUCING` points above it.
    pub inducing_count: Option<usize>,
    pub convergence_tol: f64,
    pub max_iters: usize,
    pub dense_limit: usize,
    /// Seeds the inducing-point placement.
    pub seed: u64,
}

impl Default for GpplModel {
    fn default() -> Self {
        GpplModel {
            kernel: KernelConfig::default(),
            prior_mean: None,
            inducing_count: None,
            convergence_tol: 1e-6,
            max_iters: 500,
            dense_limit: DEFAULT_DENSE_LIMIT,
            seed: 0,
        }
    }
}

impl GpplModel {
    pub fn with_prior(mut self, prior: PriorPredictions) -> Self {
        self.prior_mean = Some(prior);
        self
    }

    /// Builds the pool-dependent structures (Gram matrix or inducing basis)
    /// once so repeated refits only pay for inference.
    pub fn prepare(&self, pool: &CandidatePool) -> Result<PreparedGppl> {
        let n = pool.len();
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Validation("convergence_tol must be positive".into()));
        }
        let mu = match &self.prior_mean {
            Some(p) if p.len() != n => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.len(),
                })
            }
            Some(p) => p.mu.clone(),
            None => vec![0.0; n],
        };
        let kernel = Arc::new(self.kernel.resolve(pool)?);
        let features: Arc<Vec<Vec<f64>>> = Arc::new(pool.candidates.iter().map(|c| c.features.clone()).collect());
        let inducing = match self.inducing_count {
            Some(m) if m > n => {
                return Err(Error::Validation(format!(
                    "inducing_count {m} exceeds pool size {n}"
                )))
            }
            Some(0) => return Err(Error::Validation("inducing_count must be positive".into())),
            Some(m) => Some(m),
            None if n > self.dense_limit => Some(DEFAULT_INDUCING.min(n)),
            None => None,
        };
        let mode = match inducing {
            None => Mode::Dense(gram(&kernel, &features)),
            Some(m) => Mode::Sparse(sparse::InducingBasis::build(&kernel, &features, m, self.seed)?),
        };
        Ok(PreparedGppl {
            mu,
            kernel,
            features,
            mode,
            tol: self.convergence_tol,
            max_iters: self.max_iters,
        })
    }

    /// Fits the approximate posterior `N(f̂, C)` for `d`.
    pub fn fit(&self, pool: &CandidatePool, d: &TrainingSet) -> Result<GpPosterior> {
        self.prepare(pool)?.fit(d)
    }
}

pub fn gppl_fit(model: &GpplModel, pool: &CandidatePool, d: &TrainingSet) -> Result<GpPosterior> {
    model.fit(pool, d)
}

pub fn gppl_pair_stats(post: &GpPosterior, a: usize, b: usize) -> PairStatistics {
    post.pair_stats(a, b)
}

pub fn gppl_pair_prob(post: &GpPosterior, a: usize, b: usize) -> f64 {
    post.pair_prob(a, b)
}

/// Equal-weight mean of the z-scored prior and posterior predictions.
pub fn combine_sum(prior: &[f64], post: &[f64]) -> Result<Vec<f64>> {
    if prior.len() != post.len() {
        return Err(Error::DimensionMismatch {
            expected: post.len(),
            found: prior.len(),
        });
    }
    let zp = standardize(prior);
    let zq = standardize(post);
    Ok(zp.iter().zip(&zq).map(|(a, b)| 0.5 * a + 0.5 * b).collect())
}

#[derive(Debug, Clone)]
enum Mode {
    /// Gram matrix with jitter on the diagonal.
    Dense(DMatrix<f64>),
    Sparse(sparse::InducingBasis),
}

/// A model bound to one pool. Cheap to refit.
#[derive(Debug, Clone)]
pub struct PreparedGppl {
    mu: Vec<f64>,
    kernel: Arc<Kernel>,
    features: Arc<Vec<Vec<f64>>>,
    mode: Mode,
    tol: f64,
    max_iters: usize,
}

impl PreparedGppl {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.mode, Mode::Dense(_))
    }

    pub fn prior_mean(&self) -> &[f64] {
        &self.mu
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Inducing inputs, when the sparse approximation is active.
    pub fn inducing_points(&self) -> Option<&[Vec<f64>]> {
        match &self.mode {
            Mode::Dense(_) => None,
            Mode::Sparse(b) => Some(&b.points),
        }
    }

    pub fn fit(&self, d: &TrainingSet) -> Result<GpPosterior> {
        d.validate(self.len())?;
        let pairs: Vec<(usize, usize)> = d.records.iter().map(|r| r.winner_loser()).collect();
        match &self.mode {
            Mode::Dense(k) => self.fit_dense(k, &pairs),
            Mode::Sparse(basis) => sparse::fit(basis, &self.kernel, &self.features, &self.mu, &pairs, self.tol, self.max_iters),
        }
    }

    fn fit_dense(&self, k: &DMatrix<f64>, pairs: &[(usize, usize)]) -> Result<GpPosterior> {
        let n = self.len();
        let m = pairs.len();
        if m == 0 {
            return GpPosterior::dense(self.mu.clone(), k.clone());
        }
        // K Aᵀ, one column per label: K[:, winner] − K[:, loser].
        let mut kat = DMatrix::zeros(n, m);
        for (i, &(w, l)) in pairs.iter().enumerate() {
            for r in 0..n {
                kat[(r, i)] = k[(r, w)] - k[(r, l)];
            }
        }
        let g = DMatrix::from_fn(m, m, |i, j| kat[(pairs[i].0, j)] - kat[(pairs[i].1, j)]);
        let c = DVector::from_iterator(m, pairs.iter().map(|&(w, l)| self.mu[w] - self.mu[l]));
        let opts = ep::EpOptions {
            max_sweeps: self.max_iters,
            tol: self.tol,
        };
        let sites = ep::run(&g, &c, &vec![1.0; m], opts)?;

        let sqrt_tau = sites.tau.map(f64::sqrt);
        let mut b = DMatrix::identity(m, m);
        for i in 0..m {
            for j in 0..m {
                b[(i, j)] += sqrt_tau[i] * g[(i, j)] * sqrt_tau[j];
            }
        }
        let chol = b.cholesky().ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
        let rhs = DVector::from_fn(m, |i, _| {
            let nu_term = if sqrt_tau[i] > 0.0 { sites.nu[i] / sqrt_tau[i] } else { 0.0 };
            nu_term - sqrt_tau[i] * c[i]
        });
        let alpha = chol.solve(&rhs).component_mul(&sqrt_tau);
        let shift = &kat * alpha;
        let f_hat: Vec<f64> = self.mu.iter().zip(shift.iter()).map(|(a, b)| a + b).collect();

        // W = L⁻¹ S½ A K.
        let mut sak = kat.transpose();
        for i in 0..m {
            sak.row_mut(i).scale_mut(sqrt_tau[i]);
        }
        let w = chol.l().solve_lower_triangular(&sak).expect("triangular solve");
        let cov = k - w.tr_mul(&w);
        GpPosterior::dense(f_hat, cov)
    }
}

fn gram(kernel: &Kernel, features: &[Vec<f64>]) -> DMatrix<f64> {
    let n = features.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| (0..n).map(|b| kernel.eval(&features[a], &features[b])).collect())
        .collect();
    let mut k = DMatrix::from_fn(n, n, |a, b| rows[a][b]);
    for i in 0..n {
        k[(i, i)] += kernel.jitter;
    }
    k
}
