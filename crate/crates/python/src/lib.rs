//! Python bindings: pools, session configs, the interactive session state
//! machine, the simulated-user harness and the ranking metrics.

use std::sync::Arc;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use interank_core::domain::normalize_scores;
use interank_core::harness::{self, PoolData, SessionStatus, SynthConfig};
use interank_core::ingest::{self, PoolFormat};
use interank_core::{
    metrics, oracle, Candidate, CandidatePool as CorePool, Error, GoldScores, GpplModel, PreferenceRecord,
    PriorPredictions, SessionConfig as CoreConfig, Strategy, TrainingSet,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::NonConvergence { .. } | Error::NotPositiveDefinite { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn gold_scores(gold: Vec<f64>) -> PyResult<GoldScores> {
    normalize_scores(&gold).map_err(py_err)
}

fn priors(mu: Option<Vec<f64>>) -> PyResult<Option<PriorPredictions>> {
    mu.map(|m| PriorPredictions::new(m, "python")).transpose().map_err(py_err)
}

fn status_name(s: SessionStatus) -> &'static str {
    match s {
        SessionStatus::Ready => "ready",
        SessionStatus::AwaitingLabel => "awaiting_label",
        SessionStatus::Complete => "complete",
    }
}

fn training_set(labels: Vec<(usize, usize, bool)>) -> TrainingSet {
    let mut d = TrainingSet::new();
    for (a, b, y) in labels {
        d.push(PreferenceRecord::new(a, b, y));
    }
    d
}

/// A pool of candidates with feature vectors and optional texts.
#[pyclass(name = "CandidatePool", module = "interank", from_py_object)]
#[derive(Clone)]
struct Pool {
    inner: Arc<CorePool>,
}

#[pymethods]
impl Pool {
    #[new]
    #[pyo3(signature = (features, texts=None, topic_id="pool"))]
    fn new(features: Vec<Vec<f64>>, texts: Option<Vec<Option<String>>>, topic_id: &str) -> PyResult<Self> {
        if let Some(t) = &texts {
            if t.len() != features.len() {
                return Err(PyValueError::new_err(format!(
                    "{} texts for {} candidates",
                    t.len(),
                    features.len()
                )));
            }
        }
        let mut texts = texts.unwrap_or_default().into_iter();
        let candidates = features
            .into_iter()
            .enumerate()
            .map(|(id, features)| Candidate {
                id,
                features,
                text: texts.next().flatten(),
            })
            .collect();
        let pool = CorePool::new(topic_id, candidates).map_err(py_err)?;
        Ok(Pool { inner: Arc::new(pool) })
    }

    /// Loads a JSONL pool file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let pool = ingest::load_pool(path, PoolFormat::Jsonl).map_err(py_err)?;
        Ok(Pool { inner: Arc::new(pool) })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        ingest::save_pool(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn topic_id(&self) -> String {
        self.inner.topic_id.clone()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim
    }

    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.candidates.iter().map(|c| c.features.clone()).collect()
    }

    fn texts(&self) -> Vec<Option<String>> {
        self.inner.candidates.iter().map(|c| c.text.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "CandidatePool(topic_id={:?}, n={}, d={})",
            self.inner.topic_id,
            self.inner.len(),
            self.inner.feature_dim
        )
    }
}

/// Configuration of one interactive session.
#[pyclass(name = "SessionConfig", module = "interank", from_py_object)]
#[derive(Clone)]
struct Config {
    inner: CoreConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (
        learner="gppl", strategy="eig", warm_start="none", max_interactions=10, batch_size=1, seed=0,
        t=0.3, oracle_seed=0, bt_lambda=1.0, inducing_count=None, ndcg_k=5
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        learner: &str,
        strategy: &str,
        warm_start: &str,
        max_interactions: usize,
        batch_size: usize,
        seed: u64,
        t: f64,
        oracle_seed: u64,
        bt_lambda: f64,
        inducing_count: Option<usize>,
        ndcg_k: usize,
    ) -> PyResult<Self> {
        let mut cfg = CoreConfig::new(parse(learner)?, parse(strategy)?, parse(warm_start)?, max_interactions, seed);
        cfg.batch_size = batch_size;
        cfg.oracle.t = t;
        cfg.oracle.seed = oracle_seed;
        cfg.bt_lambda = bt_lambda;
        cfg.inducing_count = inducing_count;
        cfg.ndcg_k = ndcg_k;
        cfg.validate().map_err(py_err)?;
        Ok(Config { inner: cfg })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg: CoreConfig = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        cfg.validate().map_err(py_err)?;
        Ok(Config { inner: cfg })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("config serialises")
    }

    #[getter]
    fn learner(&self) -> &'static str {
        self.inner.learner.name()
    }

    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.name()
    }

    #[getter]
    fn warm_start(&self) -> &'static str {
        self.inner.warm_start.name()
    }

    #[getter]
    fn max_interactions(&self) -> usize {
        self.inner.max_interactions
    }

    #[getter]
    fn batch_size(&self) -> usize {
        self.inner.batch_size
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.oracle.t
    }

    fn __eq__(&self, other: &Config) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("SessionConfig({})", self.to_json())
    }
}

/// Live session: ask for a pair, submit the user's label, read the ranking.
#[pyclass(name = "Session", module = "interank")]
struct Session {
    inner: interank_core::InteractiveSession,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (config, pool, priors=None))]
    fn new(config: &Config, pool: &Pool, priors: Option<Vec<f64>>) -> PyResult<Self> {
        let p = self::priors(priors)?;
        let inner = interank_core::InteractiveSession::new(config.inner.clone(), pool.inner.clone(), p.as_ref())
            .map_err(py_err)?;
        Ok(Session { inner })
    }

    /// The pair awaiting a label; repeated calls return the same pair.
    fn next_pair(&mut self, py: Python<'_>) -> PyResult<(usize, usize)> {
        py.detach(|| self.inner.next_pair()).map_err(py_err)
    }

    /// Records that `a_id` is preferred (`label=True`) or not. Returns whether
    /// the model was refit.
    fn submit(&mut self, py: Python<'_>, a_id: usize, b_id: usize, label: bool) -> PyResult<bool> {
        let mut record = PreferenceRecord::new(a_id, b_id, label);
        record.source = interank_core::LabelSource::Human;
        py.detach(|| self.inner.submit(record)).map_err(py_err)
    }

    #[getter]
    fn pending_pair(&self) -> Option<(usize, usize)> {
        self.inner.pending_pair()
    }

    #[getter]
    fn status(&self) -> &'static str {
        status_name(self.inner.status())
    }

    #[getter]
    fn remaining(&self) -> usize {
        self.inner.remaining()
    }

    #[getter]
    fn iteration(&self) -> usize {
        self.inner.iteration()
    }

    #[getter]
    fn config(&self) -> Config {
        Config {
            inner: self.inner.config().clone(),
        }
    }

    /// Candidate ids by descending score, ties by id.
    fn ranking(&self) -> Vec<usize> {
        self.inner.ranking()
    }

    fn scores(&self) -> Vec<f64> {
        self.inner.scores().to_vec()
    }

    /// Posterior mean and per-candidate variance of the GPPL learner.
    fn posterior(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.inner
            .posterior()
            .map(|p| (p.mean().to_vec(), (0..p.len()).map(|i| p.var(i)).collect()))
    }

    /// Labels so far as `(a_id, b_id, label)` tuples.
    fn labels(&self) -> Vec<(usize, usize, bool)> {
        self.inner.data().records.iter().map(|r| (r.a_id, r.b_id, r.label)).collect()
    }

    fn evaluate<'py>(&self, py: Python<'py>, gold: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let e = self.inner.evaluate(&gold_scores(gold)?).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("accuracy", e.accuracy)?;
        d.set_item("ndcg_at_k", e.ndcg_at_k)?;
        d.set_item("k", e.k)?;
        d.set_item("pearson_r", e.pearson_r)?;
        Ok(d)
    }
}

/// Runs a session against the simulated user. Gold scores are normalised to
/// [0, 10] first.
#[pyfunction]
#[pyo3(signature = (config, pool, gold, priors=None))]
fn run_session<'py>(
    py: Python<'py>,
    config: &Config,
    pool: &Pool,
    gold: Vec<f64>,
    priors: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let gold = gold_scores(gold)?;
    let p = self::priors(priors)?;
    let cfg = config.inner.clone();
    let pool = pool.inner.clone();
    let res = py
        .detach(|| harness::run_session(&cfg, pool, &gold, p.as_ref()))
        .map_err(|f| py_err(f.error))?;
    let trace = res
        .trace
        .iter()
        .map(|r| {
            let row = PyDict::new(py);
            row.set_item("iteration", r.iteration)?;
            row.set_item("labels", r.labels)?;
            row.set_item("accuracy", r.accuracy)?;
            row.set_item("ndcg_at_k", r.ndcg_at_k)?;
            row.set_item("pearson_r", r.pearson_r)?;
            Ok(row)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let out = PyDict::new(py);
    out.set_item("trace", trace)?;
    out.set_item("final_utilities", res.final_utilities)?;
    out.set_item("ranked_ids", res.ranked_ids)?;
    let labels: Vec<(usize, usize, bool)> = res.data.records.iter().map(|r| (r.a_id, r.b_id, r.label)).collect();
    out.set_item("labels", labels)?;
    Ok(out)
}

/// Runs every config on every pool and returns one summary dict per config.
#[pyfunction]
#[pyo3(signature = (configs, pools, golds, priors=None, repeats=10))]
fn run_grid<'py>(
    py: Python<'py>,
    configs: Vec<Config>,
    pools: Vec<Pool>,
    golds: Vec<Vec<f64>>,
    priors: Option<Vec<Option<Vec<f64>>>>,
    repeats: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    if golds.len() != pools.len() {
        return Err(PyValueError::new_err("one gold vector per pool is required"));
    }
    let priors = priors.unwrap_or_else(|| vec![None; pools.len()]);
    if priors.len() != pools.len() {
        return Err(PyValueError::new_err("one prior entry per pool is required"));
    }
    let data = pools
        .into_iter()
        .zip(golds)
        .zip(priors)
        .map(|((p, g), mu)| {
            Ok(PoolData {
                pool: p.inner,
                gold: gold_scores(g)?,
                priors: self::priors(mu)?,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let configs: Vec<CoreConfig> = configs.into_iter().map(|c| c.inner).collect();
    let results = py.detach(|| harness::run_grid(&configs, &data, repeats)).map_err(py_err)?;
    results
        .summary
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("config_index", s.config_index)?;
            d.set_item("learner", s.learner.name())?;
            d.set_item("strategy", s.strategy.name())?;
            d.set_item("warm_start", s.warm_start.name())?;
            d.set_item("max_interactions", s.max_interactions)?;
            d.set_item("runs", s.runs)?;
            d.set_item("failures", s.failures)?;
            for (name, m) in [("accuracy", &s.accuracy), ("ndcg_at_k", &s.ndcg_at_k), ("pearson_r", &s.pearson_r)] {
                d.set_item(name, (m.mean, m.stdev))?;
            }
            Ok(d)
        })
        .collect()
}

/// Synthetic pool with gold scores on [0, 10] and, when
/// `prior_correlation` is given, priors correlated with the gold utility.
#[pyfunction]
#[pyo3(signature = (n, d, seed=0, noise=None, length_scale_factor=None, prior_correlation=None))]
fn generate(
    n: usize,
    d: usize,
    seed: u64,
    noise: Option<f64>,
    length_scale_factor: Option<f64>,
    prior_correlation: Option<f64>,
) -> PyResult<(Pool, Vec<f64>, Option<Vec<f64>>)> {
    let mut sc = SynthConfig::new(n, d, seed);
    if let Some(v) = noise {
        sc.noise = v;
    }
    if let Some(v) = length_scale_factor {
        sc.length_scale_factor = v;
    }
    sc.prior_correlation = prior_correlation;
    let data = harness::generate(&sc).map_err(py_err)?;
    Ok((
        Pool {
            inner: Arc::new(data.pool),
        },
        data.gold.scores,
        data.priors.map(|p| p.mu),
    ))
}

/// GPPL posterior mean and dense covariance given `(a_id, b_id, label)` tuples.
#[pyfunction]
#[pyo3(signature = (pool, labels, prior_mean=None, inducing_count=None))]
fn fit_gppl(
    py: Python<'_>,
    pool: &Pool,
    labels: Vec<(usize, usize, bool)>,
    prior_mean: Option<Vec<f64>>,
    inducing_count: Option<usize>,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let model = GpplModel {
        prior_mean: priors(prior_mean)?,
        inducing_count,
        ..GpplModel::default()
    };
    let d = training_set(labels);
    let pool = pool.inner.clone();
    let post = py.detach(|| model.fit(&pool, &d)).map_err(py_err)?;
    let cov = post.dense_covariance();
    let rows = (0..cov.nrows()).map(|i| cov.row(i).iter().copied().collect()).collect();
    Ok((post.mean().to_vec(), rows))
}

#[pyfunction]
#[pyo3(signature = (predicted, gold, k=5))]
fn evaluate<'py>(py: Python<'py>, predicted: Vec<f64>, gold: Vec<f64>, k: usize) -> PyResult<Bound<'py, PyDict>> {
    let e = metrics::evaluate(&predicted, &gold, k).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("accuracy", e.accuracy)?;
    d.set_item("ndcg_at_k", e.ndcg_at_k)?;
    d.set_item("k", e.k)?;
    d.set_item("pearson_r", e.pearson_r)?;
    Ok(d)
}

#[pyfunction]
fn ndcg_at_k(predicted: Vec<f64>, relevance: Vec<f64>, k: usize) -> PyResult<f64> {
    metrics::ndcg_at_k(&predicted, &relevance, k).map_err(py_err)
}

#[pyfunction]
fn pearson_r(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    metrics::pearson_r(&x, &y).map_err(py_err)
}

#[pyfunction]
fn top1_accuracy(predicted: Vec<f64>, gold: Vec<f64>) -> PyResult<f64> {
    metrics::top1_accuracy(&predicted, &gold).map_err(py_err)
}

#[pyfunction]
fn flatten_bottom(scores: Vec<f64>, fraction: f64) -> PyResult<Vec<f64>> {
    harness::flatten_bottom(&scores, fraction).map_err(py_err)
}

/// Probability that the simulated user prefers `a` over `b`.
#[pyfunction]
fn oracle_prob(g_a: f64, g_b: f64, t: f64) -> f64 {
    oracle::oracle_prob(g_a, g_b, t)
}

#[pyfunction]
fn strategies() -> Vec<&'static str> {
    Strategy::ALL.iter().map(|s| s.name()).collect()
}

#[pymodule]
fn interank(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Pool>()?;
    m.add_class::<Config>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(run_session, m)?)?;
    m.add_function(wrap_pyfunction!(run_grid, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gppl, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(top1_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(flatten_bottom, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_prob, m)?)?;
    m.add_function(wrap_pyfunction!(strategies, m)?)?;
    Ok(())
}
