//! Paired significance testing for comparing strategies across seeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::norm_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonTest {
    /// Sum of ranks of the positive differences `x − y`.
    pub w_plus: f64,
    /// Pairs remaining once zero differences are dropped.
    pub n_eff: usize,
    pub z: f64,
    /// Two-sided p-value from the normal approximation with tie and
    /// continuity corrections.
    pub p_value: f64,
}

/// Wilcoxon signed-rank test of `x` against `y`. Differences with magnitude
/// below `1e-12` count as zero and are dropped.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonTest> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let mut d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| v.abs() >= 1e-12).collect();
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonTest {
            w_plus: 0.0,
            n_eff: 0,
            z: 0.0,
            p_value: 1.0,
        });
    }
    d.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut w_plus = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && (d[j + 1].abs() - d[i].abs()).abs() < 1e-12 {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        w_plus += d[i..=j].iter().filter(|v| **v > 0.0).count() as f64 * rank;
        i = j + 1;
    }
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Ok(WilcoxonTest {
            w_plus,
            n_eff: n,
            z: 0.0,
            p_value: 1.0,
        });
    }
    let diff = w_plus - mu;
    let corrected = if diff.abs() <= 0.5 { 0.0 } else { diff - 0.5 * diff.signum() };
    let z = corrected / var.sqrt();
    Ok(WilcoxonTest {
        w_plus,
        n_eff: n,
        z,
        p_value: (2.0 * (1.0 - norm_cdf(z.abs()))).min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_are_tied() {
        let x = [0.1, 0.5, 0.7];
        let t = wilcoxon_signed_rank(&x, &x).unwrap();
        assert_eq!(t.n_eff, 0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn consistent_shift_is_significant() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1 + 1.0).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64 * 0.1 + (i % 5) as f64 * 0.01).collect();
        let t = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(t.w_plus, 210.0);
        assert!(t.p_value < 1e-3);
    }

    #[test]
    fn matches_reference_statistic() {
        // Ranks of |d| = 1, 2, 3, 4, 5; positives at ranks 2, 4, 5.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.1, 1.8, 3.3, 3.6, 4.5];
        let t = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!((t.w_plus - 11.0).abs() < 1e-12);
        assert!(t.p_value > 0.3);
    }
}
