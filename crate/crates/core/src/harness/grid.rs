use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::session::{run_session, Learner, SessionConfig, SessionResult, WarmStart};
use crate::acquisition::Strategy;
use crate::domain::{CandidatePool, GoldScores, PriorPredictions};
use crate::error::{Error, Result};
use crate::numeric::{mean, sample_std};

/// One evaluation pool with its gold scores and optional priors.
#[derive(Debug, Clone)]
pub struct PoolData {
    pub pool: Arc<CandidatePool>,
    pub gold: GoldScores,
    pub priors: Option<PriorPredictions>,
}

/// Seed of repeat `r`; repeat 0 keeps the configured seed.
pub fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    seed.wrapping_add((repeat as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone)]
pub struct GridRun {
    pub config_index: usize,
    pub pool_index: usize,
    pub repeat: usize,
    /// Completed result, or the partial trace of a failed run.
    pub result: Option<SessionResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub stdev: f64,
}

impl MetricSummary {
    fn of(values: &[f64]) -> Self {
        MetricSummary {
            mean: mean(values),
            stdev: sample_std(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config_index: usize,
    pub learner: Learner,
    pub strategy: Strategy,
    pub warm_start: WarmStart,
    pub max_interactions: usize,
    pub batch_size: usize,
    pub runs: usize,
    pub failures: usize,
    pub accuracy: MetricSummary,
    pub ndcg_at_k: MetricSummary,
    pub pearson_r: MetricSummary,
}

#[derive(Debug, Clone)]
pub struct GridResults {
    pub configs: Vec<SessionConfig>,
    pub topics: Vec<String>,
    pub runs: Vec<GridRun>,
    pub summary: Vec<SummaryRow>,
}

/// Runs every configuration on every pool. Stochastic strategies run
/// `repeats` times with derived seeds; deterministic ones run once per pool
/// and the result stands for every repeat. Failed sessions are recorded in
/// the run list and excluded from the summary statistics.
pub fn run_grid(configs: &[SessionConfig], pools: &[PoolData], repeats: usize) -> Result<GridResults> {
    if configs.is_empty() || pools.is_empty() {
        return Err(Error::Validation("grid needs at least one config and one pool".into()));
    }
    let repeats = repeats.max(1);
    let cells: Vec<(usize, usize, usize)> = (0..configs.len())
        .flat_map(|c| {
            let reps = if configs[c].strategy.is_stochastic() { repeats } else { 1 };
            (0..pools.len()).flat_map(move |p| (0..reps).map(move |r| (c, p, r)))
        })
        .collect();
    let computed: Vec<GridRun> = cells
        .par_iter()
        .map(|&(c, p, r)| {
            let mut cfg = configs[c].clone();
            cfg.seed = repeat_seed(cfg.seed, r);
            let data = &pools[p];
            let outcome = run_session(&cfg, Arc::clone(&data.pool), &data.gold, data.priors.as_ref());
            let (result, error) = match outcome {
                Ok(res) => (Some(res), None),
                Err(f) => (f.partial.map(|p| *p), Some(f.error.to_string())),
            };
            GridRun {
                config_index: c,
                pool_index: p,
                repeat: r,
                result,
                error,
            }
        })
        .collect();

    let mut runs = Vec::with_capacity(configs.len() * pools.len() * repeats);
    for run in computed {
        if configs[run.config_index].strategy.is_stochastic() {
            runs.push(run);
        } else {
            for r in 0..repeats {
                runs.push(GridRun { repeat: r, ..run.clone() });
            }
        }
    }

    let summary = configs
        .iter()
        .enumerate()
        .map(|(c, cfg)| {
            let mine: Vec<&GridRun> = runs.iter().filter(|r| r.config_index == c).collect();
            let ok: Vec<&SessionResult> = mine.iter().filter(|r| r.error.is_none()).filter_map(|r| r.result.as_ref()).collect();
            let col = |f: fn(&SessionResult) -> f64| MetricSummary::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                config_index: c,
                learner: cfg.learner,
                strategy: cfg.strategy,
                warm_start: cfg.warm_start,
                max_interactions: cfg.max_interactions,
                batch_size: cfg.batch_size,
                runs: mine.len(),
                failures: mine.len() - ok.len(),
                accuracy: col(|r| r.final_row().accuracy),
                ndcg_at_k: col(|r| r.final_row().ndcg_at_k),
                pearson_r: col(|r| r.final_row().pearson_r),
            }
        })
        .collect();

    Ok(GridResults {
        configs: configs.to_vec(),
        topics: pools.iter().map(|p| p.pool.topic_id.clone()).collect(),
        runs,
        summary,
    })
}
