//! Experiment harness: simulated sessions, grids over strategies and seeds,
//! synthetic data, reward flattening and result export.

pub mod export;
pub mod grid;
pub mod session;
pub mod stats;
pub mod synth;

pub use export::{export_results, import_results, parse_results, result_rows, rows_to_string, ExportFormat, ResultRow};
pub use grid::{repeat_seed, run_grid, GridResults, GridRun, MetricSummary, PoolData, SummaryRow};
pub use session::{
    run_session, session_rng, InteractiveSession, Learner, RngStream, SessionConfig, SessionFailure, SessionResult,
    SessionStatus, TraceRow, WarmStart,
};
pub use stats::{wilcoxon_signed_rank, WilcoxonTest};
pub use synth::{correlated_prior, generate, SynthConfig, SyntheticData};

use crate::error::{Error, Result};
use crate::metrics::rank_order;

/// Sets the `⌊fraction · n⌋` lowest-ranked scores to 1.0, leaving the rest
/// untouched. Rank order is descending score with ties by id, so among equal
/// scores the highest ids are flattened first.
pub fn flatten_bottom(scores: &[f64], fraction: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Validation(format!("fraction {fraction} outside [0, 1)")));
    }
    let n = scores.len();
    let count = (fraction * n as f64).floor() as usize;
    let mut out = scores.to_vec();
    for &i in rank_order(scores).iter().rev().take(count) {
        out[i] = 1.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flatten_examples() {
        let s = [9.0, 2.0, 5.0, 10.0, 0.0];
        assert_eq!(flatten_bottom(&s, 0.0).unwrap(), s.to_vec());
        assert_eq!(flatten_bottom(&s, 0.4).unwrap(), vec![9.0, 1.0, 5.0, 10.0, 1.0]);
        assert!(flatten_bottom(&s, 1.0).is_err());
        let ten: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let flat = flatten_bottom(&ten, 0.9).unwrap();
        assert_eq!(flat.iter().filter(|v| **v == 1.0).count(), 9);
        assert_eq!(flat[9], 9.0);
    }

    proptest! {
        #[test]
        fn flattening_preserves_unflattened_order(
            scores in prop::collection::vec(0.0f64..10.0, 2..60),
            fraction in 0.0f64..0.99,
        ) {
            let flat = flatten_bottom(&scores, fraction).unwrap();
            let n = scores.len();
            let keep = n - (fraction * n as f64).floor() as usize;
            let before = rank_order(&scores);
            for &i in &before[..keep] {
                prop_assert_eq!(flat[i], scores[i]);
            }
            for &i in &before[keep..] {
                prop_assert_eq!(flat[i], 1.0);
            }
            for w in before[..keep].windows(2) {
                prop_assert!(flat[w[0]] >= flat[w[1]]);
            }
        }
    }
}
