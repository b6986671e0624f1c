//! Whitened inducing-point posterior.
//!
//! With inducing values `u = L v`, `K_MM = L Lᵀ` and `v ~ N(0, I)`, the
//! projection `Ψ = K_nM L⁻ᵀ` gives the Nyström prior `ΨΨᵀ`. The variational
//! factor `q(v) = N(m, S)` is fitted by the conjugate-computation fixed point:
//! each label contributes a Gaussian site on `p_iᵀ v` whose parameters come
//! from Gauss–Hermite expectations of the log-likelihood derivatives under the
//! current marginal of `h_i = f_winner − f_loser`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::kernel::Kernel;
use super::posterior::{cholesky_with_jitter, FactoredCovariance, GpPosterior};
use crate::error::{Error, Result};
use crate::numeric::{gauss_hermite, inv_mills};

const LLOYD_ITERS: usize = 5;
const GH_ORDER: usize = 32;
const DAMPING: f64 = 0.5;

#[derive(Debug, Clone)]
pub(crate) struct InducingBasis {
    pub points: Vec<Vec<f64>>,
    /// Ψ, n × M.
    pub psi: DMatrix<f64>,
}

impl InducingBasis {
    pub fn build(kernel: &Kernel, features: &[Vec<f64>], m: usize, seed: u64) -> Result<Self> {
        let points = kmeans_pp(features, m, seed);
        let mut kmm = DMatrix::from_fn(m, m, |i, j| kernel.eval(&points[i], &points[j]));
        for i in 0..m {
            kmm[(i, i)] += kernel.jitter;
        }
        let l = cholesky_with_jitter(&kmm)?;
        let n = features.len();
        let rows: Vec<Vec<f64>> = features
            .par_iter()
            .map(|x| points.iter().map(|p| kernel.eval(x, p)).collect())
            .collect();
        let kmn = DMatrix::from_fn(m, n, |j, i| rows[i][j]);
        let x = l.solve_lower_triangular(&kmn).ok_or(Error::NotPositiveDefinite { jitter: kernel.jitter })?;
        Ok(InducingBasis { points, psi: x.transpose() })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by a few Lloyd iterations. Returns `m` centres.
pub fn kmeans_pp(features: &[Vec<f64>], m: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = features.len();
    assert!(m >= 1 && m <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centres = vec![features[first].clone()];
    let mut d2: Vec<f64> = features.iter().map(|x| sq_dist(x, &centres[0])).collect();
    while centres.len() < m {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            // Chosen points have zero weight, so only fresh points can be drawn.
            let mut target = rng.random::<f64>() * total;
            let mut idx = d2.iter().rposition(|&w| w > 0.0).expect("positive total");
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            // Every remaining point coincides with a centre.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = features[pick].clone();
        for (i, x) in features.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &c));
        }
        centres.push(c);
    }
    for _ in 0..LLOYD_ITERS {
        let assign: Vec<usize> = features
            .par_iter()
            .map(|x| {
                let mut best = 0;
                let mut bd = f64::INFINITY;
                for (j, c) in centres.iter().enumerate() {
                    let d = sq_dist(x, c);
                    if d < bd {
                        bd = d;
                        best = j;
                    }
                }
                best
            })
            .collect();
        let dim = features[0].len();
        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0usize; m];
        for (x, &j) in features.iter().zip(&assign) {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..m {
            if counts[j] > 0 {
                centres[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
    }
    centres
}

/// `E[(ln Φ)'(h)]` and `E[(ln Φ)''(h)]` for `h ~ N(μ, σ²)`.
fn expected_derivatives(nodes: &[f64], weights: &[f64], mu: f64, s2: f64) -> (f64, f64) {
    let s = s2.max(0.0).sqrt();
    let mut g1 = 0.0;
    let mut g2 = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let h = mu + s * x;
        let lam = inv_mills(h);
        g1 += w * lam;
        g2 -= w * lam * (h + lam);
    }
    (g1, g2)
}

pub(crate) fn fit(
    basis: &InducingBasis,
    kernel: &Arc<Kernel>,
    features: &Arc<Vec<Vec<f64>>>,
    mu: &[f64],
    pairs: &[(usize, usize)],
    tol: f64,
    max_iters: usize,
) -> Result<GpPosterior> {
    let psi = &basis.psi;
    let mdim = psi.ncols();
    let n = psi.nrows();
    let k = pairs.len();

    let p = DMatrix::from_fn(k, mdim, |i, j| psi[(pairs[i].0, j)] - psi[(pairs[i].1, j)]);
    let c = DVector::from_iterator(k, pairs.iter().map(|&(w, l)| mu[w] - mu[l]));
    let resid: Vec<f64> = pairs
        .iter()
        .enumerate()
        .map(|(i, &(w, l))| {
            let prior = 2.0 * kernel.prior_var() - 2.0 * kernel.eval(&features[w], &features[l]);
            (prior - p.row(i).norm_squared()).max(0.0)
        })
        .collect();

    let (nodes, weights) = gauss_hermite(GH_ORDER);
    let mut lam: DVector<f64> = DVector::zeros(k);
    let mut eta: DVector<f64> = DVector::zeros(k);
    let mut mean = DVector::zeros(mdim);
    let mut chol_l = DMatrix::identity(mdim, mdim);
    let mut converged = k == 0;
    let mut last_change = f64::INFINITY;
    let mut iter = 0;
    while !converged && iter < max_iters {
        iter += 1;
        // Marginals of h_i under q: V = L⁻¹ Pᵀ so p_iᵀ S p_i = ‖V_i‖².
        let v = chol_l.solve_lower_triangular(&p.transpose()).expect("triangular solve");
        let mh = &c + &p * &mean;
        let mut site_change = 0.0f64;
        for i in 0..k {
            let s2 = v.column(i).norm_squared() + resid[i];
            let (g1, g2) = expected_derivatives(&nodes, &weights, mh[i], s2);
            let lam_new = (-g2).max(0.0);
            let eta_new = g1 + lam_new * mh[i];
            site_change = site_change.max((lam_new - lam[i]).abs());
            lam[i] = (1.0 - DAMPING) * lam[i] + DAMPING * lam_new;
            eta[i] = (1.0 - DAMPING) * eta[i] + DAMPING * eta_new;
        }
        let mut prec = DMatrix::identity(mdim, mdim);
        let mut pw = p.clone();
        for i in 0..k {
            pw.row_mut(i).scale_mut(lam[i]);
        }
        prec += p.tr_mul(&pw);
        let ch = prec.cholesky().ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
        let rhs = p.tr_mul(&(&eta - lam.component_mul(&c)));
        let new_mean = ch.solve(&rhs);
        last_change = (&new_mean - &mean).amax().max(DAMPING * site_change);
        mean = new_mean;
        chol_l = ch.l();
        converged = last_change < tol;
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "variational inducing-point fit",
            iterations: max_iters,
            final_change: last_change,
        });
    }

    // S = L⁻ᵀ L⁻¹ = R Rᵀ with R = L⁻ᵀ.
    let r = chol_l
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(mdim, mdim))
        .expect("triangular solve");
    let s = &r * r.transpose();
    let core = &s - DMatrix::identity(mdim, mdim);
    let shift = psi * &mean;
    let f_hat: Vec<f64> = (0..n).map(|a| mu[a] + shift[a]).collect();
    let psi_r = psi * &r;
    let diag: Vec<f64> = (0..n)
        .map(|a| kernel.prior_var() - psi.row(a).norm_squared() + psi_r.row(a).norm_squared())
        .collect();
    Ok(GpPosterior::factored(
        f_hat,
        FactoredCovariance {
            kernel: Arc::clone(kernel),
            features: Arc::clone(features),
            psi: psi.clone(),
            psi_core: psi * core,
            s_factor: r,
            diag,
        },
    ))
}
