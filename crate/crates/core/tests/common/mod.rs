//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use interank_core::{CandidatePool, PreferenceRecord, TrainingSet};

pub fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

pub fn phi_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Stratified standard-normal draws: one inverse-CDF sample per equal-mass
/// stratum, so sample means converge much faster than plain MC.
pub fn stratified_normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let dist = std_normal();
    (0..n)
        .map(|i| {
            let u = (i as f64 + rng.random::<f64>()) / n as f64;
            dist.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16))
        })
        .collect()
}

/// Physicists' Gauss–Hermite nodes from the Jacobi matrix, rescaled to
/// probabilists' form so that `Σ w g(x) ≈ E[g(X)]`, `X ~ N(0, 1)`.
pub fn gh_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64 / 2.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut out: Vec<(f64, f64)> = (0..order)
        .map(|i| (eig.eigenvalues[i] * 2f64.sqrt(), eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.into_iter().unzip()
}

pub fn se_gram(features: &[Vec<f64>], ls: f64, var: f64, jitter: f64) -> DMatrix<f64> {
    let n = features.len();
    DMatrix::from_fn(n, n, |i, j| {
        let r2: f64 = features[i].iter().zip(&features[j]).map(|(a, b)| (a - b).powi(2)).sum();
        var * (-r2 / (2.0 * ls * ls)).exp() + if i == j { jitter } else { 0.0 }
    })
}

/// Exact posterior mean and covariance of `f ~ N(mu, K)` under the probit
/// pair likelihood, by tensor-product Gauss–Hermite quadrature in whitened
/// coordinates `f = mu + L z`.
pub fn quadrature_posterior(mu: &[f64], k: &DMatrix<f64>, data: &TrainingSet, order: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = mu.len();
    let l = k.clone().cholesky().expect("prior covariance is PD").l();
    let (x, w) = gh_rule(order);
    let dist = std_normal();
    let mut idx = vec![0usize; n];
    let mut z = DVector::<f64>::zeros(n);
    let mut mass = 0.0;
    let mut m1 = vec![0.0; n];
    let mut m2 = DMatrix::<f64>::zeros(n, n);
    loop {
        let mut weight = 1.0;
        for d in 0..n {
            z[d] = x[idx[d]];
            weight *= w[idx[d]];
        }
        let f: Vec<f64> = (0..n).map(|i| mu[i] + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>()).collect();
        let mut lik = 1.0;
        for r in &data.records {
            let (win, lose) = r.winner_loser();
            lik *= dist.cdf(f[win] - f[lose]);
        }
        let p = weight * lik;
        mass += p;
        for i in 0..n {
            m1[i] += p * f[i];
            for j in 0..n {
                m2[(i, j)] += p * f[i] * f[j];
            }
        }
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < order {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == n {
                let mean: Vec<f64> = m1.iter().map(|v| v / mass).collect();
                let cov = DMatrix::from_fn(n, n, |i, j| m2[(i, j)] / mass - mean[i] * mean[j]);
                return (mean, cov);
            }
        }
    }
}

pub fn random_pool<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> CandidatePool {
    let rows = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    CandidatePool::from_features("test", rows).unwrap()
}

pub fn random_pairs<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> TrainingSet {
    let mut d = TrainingSet::new();
    for _ in 0..count {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        d.push(PreferenceRecord::new(a, b, rng.random::<bool>()));
    }
    d
}

/// Position of every id under descending score, ties by ascending id.
pub fn brute_positions(scores: &[f64]) -> Vec<usize> {
    (0..scores.len())
        .map(|i| {
            (0..scores.len())
                .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
                .count()
        })
        .collect()
}

/// NDCG@k with the ideal DCG found by enumerating every permutation.
pub fn brute_ndcg(pred: &[f64], rel: &[f64], k: usize) -> f64 {
    let n = rel.len();
    let disc = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let pos = brute_positions(pred);
    let dcg: f64 = (0..n).filter(|&i| pos[i] < k).map(|i| rel[i] * disc(pos[i])).sum();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::NEG_INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let v: f64 = p.iter().take(k).enumerate().map(|(r, &i)| rel[i] * disc(r)).sum();
        best = best.max(v);
    });
    if best == 0.0 {
        1.0
    } else {
        dcg / best
    }
}

fn permute(v: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    if start == v.len() {
        f(v);
        return;
    }
    for i in start..v.len() {
        v.swap(start, i);
        permute(v, start + 1, f);
        v.swap(start, i);
    }
}

/// Pearson r from the textbook formula with explicit deviations.
pub fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

pub fn brute_top1(pred: &[f64], gold: &[f64]) -> f64 {
    let first_max = |v: &[f64]| {
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        v.iter().position(|x| *x == m).unwrap()
    };
    if first_max(pred) == first_max(gold) {
        1.0
    } else {
        0.0
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
