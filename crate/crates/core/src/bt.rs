//! Bradley–Terry baseline: linear utilities `f = w·φ` fitted by L2-regularised
//! logistic regression on feature differences, with every label counted in
//! both orientations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{Candidate, CandidatePool, TrainingSet};
use crate::error::{Error, Result};
use crate::numeric::{logistic, logistic_exact_complement, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtModel {
    pub weights: Vec<f64>,
    pub reg_lambda: f64,
    pub trained_on: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtTrainOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for BtTrainOptions {
    fn default() -> Self {
        BtTrainOptions {
            max_iters: 100,
            grad_tol: 1e-5,
        }
    }
}

/// Doubled design: rows `φ(a) − φ(b)` with target `y` and `φ(b) − φ(a)` with `1 − y`.
pub struct BtObjective {
    x: DMatrix<f64>,
    y: DVector<f64>,
    reg_lambda: f64,
}

impl BtObjective {
    pub fn new(d: &TrainingSet, pool: &CandidatePool, reg_lambda: f64) -> Result<Self> {
        d.validate(pool.len())?;
        let dim = pool.feature_dim;
        let rows = 2 * d.len();
        let mut x = DMatrix::zeros(rows, dim);
        let mut y = DVector::zeros(rows);
        for (i, r) in d.records.iter().enumerate() {
            let fa = pool.features(r.a_id);
            let fb = pool.features(r.b_id);
            let target = if r.label { 1.0 } else { 0.0 };
            for k in 0..dim {
                x[(2 * i, k)] = fa[k] - fb[k];
                x[(2 * i + 1, k)] = fb[k] - fa[k];
            }
            y[2 * i] = target;
            y[2 * i + 1] = 1.0 - target;
        }
        Ok(BtObjective { x, y, reg_lambda })
    }

    /// Cross-entropy summed over the doubled data plus `λ/2 ‖w‖²`.
    pub fn loss(&self, w: &DVector<f64>) -> f64 {
        let s = &self.x * w;
        let ce: f64 = s
            .iter()
            .zip(self.y.iter())
            .map(|(&s, &y)| y * softplus(-s) + (1.0 - y) * softplus(s))
            .sum();
        ce + 0.5 * self.reg_lambda * w.norm_squared()
    }

    pub fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let s = &self.x * w;
        let resid = DVector::from_iterator(s.len(), s.iter().zip(self.y.iter()).map(|(&s, &y)| logistic(s) - y));
        self.x.tr_mul(&resid) + w * self.reg_lambda
    }

    fn hessian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let s = &self.x * w;
        let mut weighted = self.x.clone();
        for (i, &si) in s.iter().enumerate() {
            let p = logistic(si);
            let c = p * (1.0 - p);
            weighted.row_mut(i).scale_mut(c);
        }
        let mut h = self.x.tr_mul(&weighted);
        for k in 0..h.nrows() {
            h[(k, k)] += self.reg_lambda;
        }
        h
    }
}

/// Trace of one training run, kept so the monotone-loss property is testable.
#[derive(Debug, Clone)]
pub struct BtFit {
    pub model: BtModel,
    pub losses: Vec<f64>,
    pub grad_norm: f64,
}

/// Damped Newton descent on the regularised objective.
pub fn bt_train_with(d: &TrainingSet, pool: &CandidatePool, reg_lambda: f64, opts: BtTrainOptions) -> Result<BtFit> {
    if !(reg_lambda > 0.0) {
        return Err(Error::Validation("reg_lambda must be positive".into()));
    }
    let dim = pool.feature_dim;
    let mut w = DVector::zeros(dim);
    if d.is_empty() {
        return Ok(BtFit {
            model: BtModel {
                weights: vec![0.0; dim],
                reg_lambda,
                trained_on: 0,
            },
            losses: vec![0.0],
            grad_norm: 0.0,
        });
    }
    let obj = BtObjective::new(d, pool, reg_lambda)?;
    let mut loss = obj.loss(&w);
    let mut losses = vec![loss];
    let mut grad = obj.gradient(&w);
    for _ in 0..opts.max_iters {
        if grad.norm() <= opts.grad_tol {
            break;
        }
        let h = obj.hessian(&w);
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let mut t = 1.0;
        loop {
            let cand = &w - &step * t;
            let cand_loss = obj.loss(&cand);
            if cand_loss <= loss || t < 1e-12 {
                if cand_loss <= loss {
                    w = cand;
                    loss = cand_loss;
                }
                break;
            }
            t *= 0.5;
        }
        losses.push(loss);
        grad = obj.gradient(&w);
    }
    let grad_norm = grad.norm();
    if grad_norm > opts.grad_tol {
        return Err(Error::NonConvergence {
            what: "Bradley–Terry training",
            iterations: opts.max_iters,
            final_change: grad_norm,
        });
    }
    Ok(BtFit {
        model: BtModel {
            weights: w.iter().copied().collect(),
            reg_lambda,
            trained_on: d.len(),
        },
        losses,
        grad_norm,
    })
}

pub fn bt_train(d: &TrainingSet, pool: &CandidatePool, reg_lambda: f64) -> Result<BtModel> {
    bt_train_with(d, pool, reg_lambda, BtTrainOptions::default()).map(|f| f.model)
}

fn dot(w: &[f64], x: &[f64]) -> Result<f64> {
    if w.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: x.len(),
        });
    }
    Ok(w.iter().zip(x).map(|(a, b)| a * b).sum())
}

/// `f_a = w·φ(a)` for every candidate.
pub fn bt_utilities(model: &BtModel, pool: &CandidatePool) -> Result<Vec<f64>> {
    pool.candidates.iter().map(|c| dot(&model.weights, &c.features)).collect()
}

/// `σ(f_a − f_b)`.
pub fn bt_pair_prob(model: &BtModel, a: &Candidate, b: &Candidate) -> Result<f64> {
    Ok(logistic_exact_complement(dot(&model.weights, &a.features)? - dot(&model.weights, &b.features)?))
}
