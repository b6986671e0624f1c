//! Expectation propagation for probit pairwise likelihoods.
//!
//! The likelihood touches `f` only through the differences `h = A f`, one
//! row per label, so EP runs entirely on the m-dimensional Gaussian
//! `h ~ N(c, G)` with `c = Aμ` and `G = A K Aᵀ`. Sites are Gaussian in `h_i`
//! with natural parameters `(τ̃_i, ν̃_i)`; the label enters as `y_i = ±1` on
//! `Φ(y_i h_i)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::inv_mills;

#[derive(Debug, Clone, Copy)]
pub struct EpOptions {
    pub max_sweeps: usize,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct EpSites {
    pub tau: DVector<f64>,
    pub nu: DVector<f64>,
    pub sweeps: usize,
}

/// Minimum site precision; probit sites are strictly positive analytically.
const MIN_TAU: f64 = 1e-12;

/// Posterior `(Σ, mean)` over `h` for the given sites, using the stable
/// `B = I + S½ G S½` form so a singular `G` (repeated pairs) is harmless.
pub fn site_posterior(g: &DMatrix<f64>, c: &DVector<f64>, sites: &EpSites) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = g.nrows();
    let sqrt_tau = sites.tau.map(f64::sqrt);
    let mut b = DMatrix::identity(m, m);
    for i in 0..m {
        for j in 0..m {
            b[(i, j)] += sqrt_tau[i] * g[(i, j)] * sqrt_tau[j];
        }
    }
    let chol = b.cholesky().ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
    // V = L⁻¹ S½ G
    let mut sg = g.clone();
    for i in 0..m {
        sg.row_mut(i).scale_mut(sqrt_tau[i]);
    }
    let v = chol.l().solve_lower_triangular(&sg).expect("triangular solve");
    let sigma = g - v.tr_mul(&v);
    let resid = &sites.nu - sites.tau.component_mul(c);
    let mean = c + &sigma * resid;
    Ok((sigma, mean))
}

/// Tilted moments of `N(h; μ, σ²) Φ(y h)`.
fn probit_moments(y: f64, mu: f64, s2: f64) -> (f64, f64) {
    let denom = (1.0 + s2).sqrt();
    let z = y * mu / denom;
    let lam = inv_mills(z);
    let mean = mu + y * s2 * lam / denom;
    let var = s2 - s2 * s2 * lam * (z + lam) / (1.0 + s2);
    (mean, var)
}

/// Sequential EP with a full recomputation of the posterior after each sweep.
pub fn run(g: &DMatrix<f64>, c: &DVector<f64>, y: &[f64], opts: EpOptions) -> Result<EpSites> {
    let m = g.nrows();
    let mut sites = EpSites {
        tau: DVector::zeros(m),
        nu: DVector::zeros(m),
        sweeps: 0,
    };
    if m == 0 {
        return Ok(sites);
    }
    let mut sigma = g.clone();
    let mut mean = c.clone();
    let mut last_change = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        let prev_mean = mean.clone();
        for i in 0..m {
            let s2 = sigma[(i, i)];
            let tau_cav = 1.0 / s2 - sites.tau[i];
            let nu_cav = mean[i] / s2 - sites.nu[i];
            if !(tau_cav > 0.0) || !tau_cav.is_finite() {
                continue;
            }
            let (mu_hat, var_hat) = probit_moments(y[i], nu_cav / tau_cav, 1.0 / tau_cav);
            if !(var_hat > 0.0) {
                continue;
            }
            let new_tau = (1.0 / var_hat - tau_cav).max(MIN_TAU);
            let delta_tau = new_tau - sites.tau[i];
            sites.tau[i] = new_tau;
            sites.nu[i] = mu_hat / var_hat - nu_cav;

            let col = sigma.column(i).clone_owned();
            let scale = delta_tau / (1.0 + delta_tau * s2);
            sigma -= (&col * col.transpose()) * scale;
            let resid = &sites.nu - sites.tau.component_mul(c);
            mean = c + &sigma * resid;
        }
        let (s, mu) = site_posterior(g, c, &sites)?;
        sigma = s;
        mean = mu;
        sites.sweeps = sweep;
        last_change = (&mean - &prev_mean).amax();
        if last_change < opts.tol {
            return Ok(sites);
        }
    }
    Err(Error::NonConvergence {
        what: "expectation propagation",
        iterations: opts.max_sweeps,
        final_change: last_change,
    })
}
