use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{select_batch, AcquisitionConfig, ModelView, Strategy};
use crate::bt::{bt_train, bt_utilities, BtModel};
use crate::domain::{CandidatePool, GoldScores, PreferenceRecord, PriorPredictions, TrainingSet};
use crate::error::{Error, Result};
use crate::gppl::{combine_sum, GpPosterior, GpplModel, KernelConfig, PreparedGppl};
use crate::metrics::{evaluate, rank_order, RankingEvaluation};
use crate::numeric::standardize;
use crate::oracle::{oracle_label, OracleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    Bt,
    Gppl,
}

impl Learner {
    pub fn name(self) -> &'static str {
        match self {
            Learner::Bt => "bt",
            Learner::Gppl => "gppl",
        }
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Learner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bt" => Ok(Learner::Bt),
            "gppl" => Ok(Learner::Gppl),
            _ => Err(Error::Validation(format!("unknown learner {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmStart {
    None,
    /// Rank by the equal-weight mean of the z-scored prior and the cold model.
    Sum,
    /// Use the z-scored prior as the GP prior mean.
    Prior,
}

impl WarmStart {
    pub fn name(self) -> &'static str {
        match self {
            WarmStart::None => "none",
            WarmStart::Sum => "sum",
            WarmStart::Prior => "prior",
        }
    }
}

impl fmt::Display for WarmStart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WarmStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(WarmStart::None),
            "sum" => Ok(WarmStart::Sum),
            "prior" => Ok(WarmStart::Prior),
            _ => Err(Error::Validation(format!("unknown warm start {s:?}"))),
        }
    }
}

fn default_batch() -> usize {
    1
}

fn default_lambda() -> f64 {
    1.0
}

fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub learner: Learner,
    pub strategy: Strategy,
    pub warm_start: WarmStart,
    pub max_interactions: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default = "default_lambda")]
    pub bt_lambda: f64,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inducing_count: Option<usize>,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    /// Cut-off for the NDCG column of the trace.
    #[serde(default = "default_k")]
    pub ndcg_k: usize,
}

impl SessionConfig {
    pub fn new(learner: Learner, strategy: Strategy, warm_start: WarmStart, max_interactions: usize, seed: u64) -> Self {
        SessionConfig {
            learner,
            strategy,
            warm_start,
            max_interactions,
            batch_size: 1,
            seed,
            oracle: OracleConfig::default(),
            bt_lambda: 1.0,
            kernel: KernelConfig::default(),
            inducing_count: None,
            acquisition: AcquisitionConfig::default(),
            ndcg_k: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_interactions == 0 {
            return Err(Error::Validation("max_interactions must be ≥ 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch_size must be ≥ 1".into()));
        }
        if self.ndcg_k == 0 {
            return Err(Error::Validation("ndcg_k must be ≥ 1".into()));
        }
        if self.warm_start == WarmStart::Prior && self.learner != Learner::Gppl {
            return Err(Error::Validation("warm_start = prior requires learner = gppl".into()));
        }
        if self.learner == Learner::Bt && self.strategy.needs_posterior() {
            return Err(Error::IncompatibleStrategy {
                strategy: self.strategy.name(),
                learner: "bt",
            });
        }
        if !(self.bt_lambda > 0.0) {
            return Err(Error::Validation("bt_lambda must be positive".into()));
        }
        self.kernel.validate()
    }

    /// Number of rows in a completed trace, iteration 0 included.
    pub fn trace_len(&self) -> usize {
        self.max_interactions.div_ceil(self.batch_size) + 1
    }
}

/// The independent random streams of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    Acquisition = 0,
    Oracle = 1,
    Placement = 2,
}

/// A ChaCha8 generator for one stream of a session seed.
pub fn session_rng(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone)]
enum Fitted {
    Bt { model: BtModel, utilities: Vec<f64> },
    Gppl(GpPosterior),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    /// No pair outstanding; the next call to `next_pair` selects a batch.
    Ready,
    AwaitingLabel,
    Complete,
}

/// Algorithm state shared by the offline harness and the live service: the
/// data so far, the fitted learner and the queue of selected but unlabelled pairs.
#[derive(Debug, Clone)]
pub struct InteractiveSession {
    cfg: SessionConfig,
    pool: Arc<CandidatePool>,
    prior: Option<Vec<f64>>,
    prepared: Option<PreparedGppl>,
    data: TrainingSet,
    fitted: Fitted,
    scores: Vec<f64>,
    pending: VecDeque<(usize, usize)>,
    iteration: usize,
    acq_rng: ChaCha8Rng,
}

impl InteractiveSession {
    pub fn new(cfg: SessionConfig, pool: Arc<CandidatePool>, priors: Option<&PriorPredictions>) -> Result<Self> {
        cfg.validate()?;
        let n = pool.len();
        if n < 2 {
            return Err(Error::Validation("pool must contain ≥ 2 candidates".into()));
        }
        let prior = match (cfg.warm_start, priors) {
            (WarmStart::None, _) => None,
            (_, None) => {
                return Err(Error::Validation(format!(
                    "warm_start = {} requires prior predictions",
                    cfg.warm_start
                )))
            }
            (_, Some(p)) if p.len() != n => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.len(),
                })
            }
            (_, Some(p)) => Some(p.mu.clone()),
        };
        let prepared = match cfg.learner {
            Learner::Bt => None,
            Learner::Gppl => {
                let mut model = GpplModel {
                    kernel: cfg.kernel.clone(),
                    inducing_count: cfg.inducing_count,
                    seed: cfg.seed,
                    ..GpplModel::default()
                };
                if cfg.warm_start == WarmStart::Prior {
                    let mu = standardize(prior.as_ref().expect("checked above"));
                    model.prior_mean = Some(PriorPredictions::new(mu, "standardised prior")?);
                }
                Some(model.prepare(&pool)?)
            }
        };
        let acq_rng = session_rng(cfg.seed, RngStream::Acquisition);
        let mut s = InteractiveSession {
            cfg,
            pool,
            prior,
            prepared,
            data: TrainingSet::new(),
            fitted: Fitted::Bt {
                model: BtModel {
                    weights: Vec::new(),
                    reg_lambda: 1.0,
                    trained_on: 0,
                },
                utilities: Vec::new(),
            },
            scores: Vec::new(),
            pending: VecDeque::new(),
            iteration: 0,
            acq_rng,
        };
        s.refit()?;
        Ok(s)
    }

    fn refit(&mut self) -> Result<()> {
        self.fitted = match &self.prepared {
            None => {
                let model = bt_train(&self.data, &self.pool, self.cfg.bt_lambda)?;
                let utilities = bt_utilities(&model, &self.pool)?;
                Fitted::Bt { model, utilities }
            }
            Some(p) => Fitted::Gppl(p.fit(&self.data)?),
        };
        let learner = self.learner_utilities();
        self.scores = match (&self.prior, self.cfg.warm_start) {
            (Some(prior), WarmStart::Sum) => combine_sum(prior, learner)?,
            // The prior mean is the standardised prior; report the prior itself
            // while the posterior is still the prior.
            (Some(prior), WarmStart::Prior) if self.data.is_empty() => prior.clone(),
            _ => learner.to_vec(),
        };
        Ok(())
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn pool(&self) -> &Arc<CandidatePool> {
        &self.pool
    }

    pub fn data(&self) -> &TrainingSet {
        &self.data
    }

    /// Completed refits after the initial fit.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Labels still allowed by the budget.
    pub fn remaining(&self) -> usize {
        self.cfg.max_interactions - self.data.len()
    }

    pub fn status(&self) -> SessionStatus {
        if self.remaining() == 0 {
            SessionStatus::Complete
        } else if self.pending.is_empty() {
            SessionStatus::Ready
        } else {
            SessionStatus::AwaitingLabel
        }
    }

    /// Scores used for ranking and evaluation.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// The learner's own utilities (posterior mean or BT utilities).
    pub fn learner_utilities(&self) -> &[f64] {
        match &self.fitted {
            Fitted::Bt { utilities, .. } => utilities,
            Fitted::Gppl(p) => p.mean(),
        }
    }

    pub fn posterior(&self) -> Option<&GpPosterior> {
        match &self.fitted {
            Fitted::Gppl(p) => Some(p),
            Fitted::Bt { .. } => None,
        }
    }

    pub fn bt_model(&self) -> Option<&BtModel> {
        match &self.fitted {
            Fitted::Bt { model, .. } => Some(model),
            Fitted::Gppl(_) => None,
        }
    }

    /// Ids by descending score, ties by id.
    pub fn ranking(&self) -> Vec<usize> {
        rank_order(&self.scores)
    }

    pub fn evaluate(&self, gold: &GoldScores) -> Result<RankingEvaluation> {
        evaluate(&self.scores, &gold.scores, self.cfg.ndcg_k)
    }

    /// The selected pair awaiting a label, if any.
    pub fn pending_pair(&self) -> Option<(usize, usize)> {
        self.pending.front().copied()
    }

    /// Returns the pair awaiting a label, selecting a new batch first when the
    /// queue is empty. Repeated calls return the same pair until it is labelled.
    pub fn next_pair(&mut self) -> Result<(usize, usize)> {
        if self.remaining() == 0 {
            return Err(Error::Validation("interaction budget exhausted".into()));
        }
        if self.pending.is_empty() {
            let size = self.cfg.batch_size.min(self.remaining());
            let view = match &self.fitted {
                Fitted::Bt { utilities, .. } => ModelView::Utilities(utilities),
                Fitted::Gppl(p) => ModelView::Posterior(p),
            };
            let batch = select_batch(self.cfg.strategy, view, size, &self.cfg.acquisition, &mut self.acq_rng)?;
            self.pending.extend(batch.into_iter().map(|s| s.pair));
        }
        Ok(self.pending[0])
    }

    /// Records a label for the pending pair, which may be given in either
    /// orientation. Refits once the current batch is fully labelled and
    /// returns whether a refit happened.
    pub fn submit(&mut self, mut record: PreferenceRecord) -> Result<bool> {
        let (x, y) = self
            .pending
            .front()
            .copied()
            .ok_or_else(|| Error::Validation("no pair is awaiting a label".into()))?;
        let matches = (record.a_id, record.b_id) == (x, y) || (record.a_id, record.b_id) == (y, x);
        if !matches {
            return Err(Error::Validation(format!(
                "label for ({}, {}) does not match pending pair ({x}, {y})",
                record.a_id, record.b_id
            )));
        }
        self.pending.pop_front();
        record.iteration = self.iteration + 1;
        self.data.push(record);
        if self.pending.is_empty() {
            self.iteration += 1;
            self.refit()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub labels: usize,
    pub accuracy: f64,
    pub ndcg_at_k: f64,
    pub k: usize,
    pub pearson_r: f64,
}

impl TraceRow {
    fn new(iteration: usize, labels: usize, e: RankingEvaluation) -> Self {
        TraceRow {
            iteration,
            labels,
            accuracy: e.accuracy,
            ndcg_at_k: e.ndcg_at_k,
            k: e.k,
            pearson_r: e.pearson_r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub config: SessionConfig,
    pub trace: Vec<TraceRow>,
    pub final_utilities: Vec<f64>,
    pub ranked_ids: Vec<usize>,
    pub data: TrainingSet,
}

impl SessionResult {
    pub fn final_row(&self) -> &TraceRow {
        self.trace.last().expect("trace always has iteration 0")
    }
}

/// A session that failed part-way; `partial` holds the trace up to the failure.
#[derive(Debug)]
pub struct SessionFailure {
    pub error: Error,
    pub partial: Option<Box<SessionResult>>,
}

impl fmt::Display for SessionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.partial {
            Some(p) => write!(f, "{} (after {} labels)", self.error, p.data.len()),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for SessionFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<SessionFailure> for Error {
    fn from(f: SessionFailure) -> Self {
        f.error
    }
}

/// Runs the interactive loop against the simulated oracle until the budget
/// is spent, evaluating after the initial fit and after every batch.
pub fn run_session(
    cfg: &SessionConfig,
    pool: Arc<CandidatePool>,
    gold: &GoldScores,
    priors: Option<&PriorPredictions>,
) -> std::result::Result<SessionResult, SessionFailure> {
    let fail = |error| SessionFailure { error, partial: None };
    cfg.oracle.validate().map_err(fail)?;
    if gold.len() != pool.len() {
        return Err(fail(Error::DimensionMismatch {
            expected: pool.len(),
            found: gold.len(),
        }));
    }
    let mut session = InteractiveSession::new(cfg.clone(), pool, priors).map_err(fail)?;
    let mut oracle_rng = session_rng(cfg.seed ^ cfg.oracle.seed.rotate_left(32), RngStream::Oracle);
    let mut trace = Vec::with_capacity(cfg.trace_len());
    let snapshot = |s: &InteractiveSession, trace: &[TraceRow]| SessionResult {
        config: cfg.clone(),
        trace: trace.to_vec(),
        final_utilities: s.scores().to_vec(),
        ranked_ids: s.ranking(),
        data: s.data().clone(),
    };
    let first = session.evaluate(gold).map_err(fail)?;
    trace.push(TraceRow::new(0, 0, first));

    while session.remaining() > 0 {
        let step = (|| -> Result<bool> {
            let pair = session.next_pair()?;
            let record = oracle_label(pair, gold, cfg.oracle.t, &mut oracle_rng)?;
            session.submit(record)
        })();
        match step {
            Ok(true) => match session.evaluate(gold) {
                Ok(e) => trace.push(TraceRow::new(session.iteration(), session.data().len(), e)),
                Err(error) => {
                    return Err(SessionFailure {
                        error,
                        partial: Some(Box::new(snapshot(&session, &trace))),
                    })
                }
            },
            Ok(false) => {}
            Err(error) => {
                return Err(SessionFailure {
                    error,
                    partial: Some(Box::new(snapshot(&session, &trace))),
                })
            }
        }
    }
    Ok(snapshot(&session, &trace))
}
