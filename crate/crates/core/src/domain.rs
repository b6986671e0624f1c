//! Shared value types: candidate pools, preference records, gold scores and
//! prior predictions.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One candidate text with its feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// A topic's candidate set. Ids are dense `0..n` so that posterior vectors
/// and covariance matrices can be indexed by id directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub topic_id: String,
    pub candidates: Vec<Candidate>,
    pub feature_dim: usize,
}

impl CandidatePool {
    /// Builds and validates a pool; candidate `i` must carry id `i`.
    pub fn new(topic_id: impl Into<String>, candidates: Vec<Candidate>) -> Result<Self> {
        let feature_dim = candidates.first().map_or(0, |c| c.features.len());
        let pool = CandidatePool {
            topic_id: topic_id.into(),
            candidates,
            feature_dim,
        };
        let report = validate_pool(&pool);
        if report.is_empty() {
            Ok(pool)
        } else {
            Err(Error::InvalidPool(report))
        }
    }

    /// Convenience constructor from bare feature rows; ids follow row order.
    pub fn from_features(topic_id: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let candidates = rows
            .into_iter()
            .enumerate()
            .map(|(id, features)| Candidate {
                id,
                features,
                text: None,
            })
            .collect();
        Self::new(topic_id, candidates)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn features(&self, id: usize) -> &[f64] {
        &self.candidates[id].features
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.candidates.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    TooFewCandidates { found: usize },
    ZeroFeatureDim,
    DuplicateId { id: usize },
    NonDenseId { position: usize, id: usize },
    DimensionMismatch { id: usize, expected: usize, found: usize },
    NonFiniteFeature { id: usize, index: usize },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::TooFewCandidates { found } => {
                write!(f, "pool must contain ≥ 2 candidates (found {found})")
            }
            ValidationIssue::ZeroFeatureDim => write!(f, "feature dimension must be positive"),
            ValidationIssue::DuplicateId { id } => write!(f, "duplicate id {id}"),
            ValidationIssue::NonDenseId { position, id } => {
                write!(f, "candidate at position {position} has id {id}; ids must be 0..n-1 in order")
            }
            ValidationIssue::DimensionMismatch { id, expected, found } => {
                write!(f, "candidate {id} has {found} features, pool dimension is {expected}")
            }
            ValidationIssue::NonFiniteFeature { id, index } => {
                write!(f, "candidate {id} has a non-finite feature at index {index}")
            }
        }
    }
}

/// Problems found by [`validate_pool`]; empty means every invariant holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every pool invariant and reports all violations rather than the first.
pub fn validate_pool(pool: &CandidatePool) -> ValidationReport {
    let mut issues = Vec::new();
    if pool.candidates.len() < 2 {
        issues.push(ValidationIssue::TooFewCandidates {
            found: pool.candidates.len(),
        });
    }
    if pool.feature_dim == 0 && !pool.candidates.is_empty() {
        issues.push(ValidationIssue::ZeroFeatureDim);
    }
    let mut seen = HashSet::new();
    for (position, c) in pool.candidates.iter().enumerate() {
        if !seen.insert(c.id) {
            issues.push(ValidationIssue::DuplicateId { id: c.id });
        } else if c.id != position {
            issues.push(ValidationIssue::NonDenseId { position, id: c.id });
        }
        if c.features.len() != pool.feature_dim {
            issues.push(ValidationIssue::DimensionMismatch {
                id: c.id,
                expected: pool.feature_dim,
                found: c.features.len(),
            });
        }
        if let Some(index) = c.features.iter().position(|x| !x.is_finite()) {
            issues.push(ValidationIssue::NonFiniteFeature { id: c.id, index });
        }
    }
    ValidationReport { issues }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Simulated,
    Human,
}

/// One pairwise judgement: `label == true` means `a_id` was preferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub a_id: usize,
    pub b_id: usize,
    pub label: bool,
    pub source: LabelSource,
    pub iteration: usize,
}

impl PreferenceRecord {
    pub fn new(a_id: usize, b_id: usize, label: bool) -> Self {
        PreferenceRecord {
            a_id,
            b_id,
            label,
            source: LabelSource::Simulated,
            iteration: 0,
        }
    }

    /// Ids of (winner, loser).
    pub fn winner_loser(&self) -> (usize, usize) {
        if self.label {
            (self.a_id, self.b_id)
        } else {
            (self.b_id, self.a_id)
        }
    }
}

/// The accumulated labelled pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub records: Vec<PreferenceRecord>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: PreferenceRecord) {
        self.records.push(record);
    }

    /// Checks each record refers to two distinct ids inside a pool of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.a_id == r.b_id {
                return Err(Error::Validation(format!("record {i} compares candidate {} with itself", r.a_id)));
            }
            if r.a_id >= n || r.b_id >= n {
                return Err(Error::Validation(format!(
                    "record {i} refers to ({}, {}) outside a pool of {n}",
                    r.a_id, r.b_id
                )));
            }
        }
        Ok(())
    }
}

impl FromIterator<PreferenceRecord> for TrainingSet {
    fn from_iter<I: IntoIterator<Item = PreferenceRecord>>(iter: I) -> Self {
        TrainingSet {
            records: iter.into_iter().collect(),
        }
    }
}

/// Ground-truth utilities per candidate id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldScores {
    pub scores: Vec<f64>,
    pub normalised: bool,
}

impl GoldScores {
    pub fn raw(scores: Vec<f64>) -> Result<Self> {
        check_finite(&scores, "gold score")?;
        Ok(GoldScores {
            scores,
            normalised: false,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Prior utility predictions from a pretrained scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorPredictions {
    pub mu: Vec<f64>,
    pub origin: String,
}

impl PriorPredictions {
    pub fn new(mu: Vec<f64>, origin: impl Into<String>) -> Result<Self> {
        check_finite(&mu, "prior score")?;
        Ok(PriorPredictions {
            mu,
            origin: origin.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Validation(format!("{what} {i} is not finite"))),
        None => Ok(()),
    }
}

/// Min-max normalisation onto `[0, 10]`. A constant vector maps to 5.0
/// everywhere so degenerate pools still run end to end.
pub fn normalize_scores(raw: &[f64]) -> Result<GoldScores> {
    if raw.is_empty() {
        return Err(Error::Validation("cannot normalise an empty score vector".into()));
    }
    check_finite(raw, "score")?;
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let span = hi - lo;
    let scores = if span > 0.0 {
        raw.iter()
            .map(|&x| {
                // Pin the endpoints so the range is exactly [0, 10].
                if x == hi {
                    10.0
                } else {
                    10.0 * (x - lo) / span
                }
            })
            .collect()
    } else {
        vec![5.0; raw.len()]
    };
    Ok(GoldScores {
        scores,
        normalised: true,
    })
}
