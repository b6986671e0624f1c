//! Wire types of the v1 JSON API. Every response carries `schema_version`.

use serde::{Deserialize, Serialize};

use interank_core::harness::SessionStatus;
use interank_core::{Candidate, CandidatePool, SessionConfig};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateUpload {
    /// Defaults to the position in the list.
    #[serde(default)]
    pub id: Option<usize>,
    pub features: Vec<f64>,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolUpload {
    #[serde(default)]
    pub topic_id: Option<String>,
    pub candidates: Vec<CandidateUpload>,
}

impl PoolUpload {
    pub fn into_pool(self) -> interank_core::Result<CandidatePool> {
        let candidates = self
            .candidates
            .into_iter()
            .enumerate()
            .map(|(i, c)| Candidate {
                id: c.id.unwrap_or(i),
                features: c.features,
                text: c.text,
            })
            .collect();
        CandidatePool::new(self.topic_id.unwrap_or_else(|| "uploaded".into()), candidates)
    }
}

/// Body of `POST /v1/sessions`. Exactly one of `pool` and `pool_id` must be
/// given. Any oracle settings in `config` are ignored: the client is the oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub config: SessionConfig,
    #[serde(default)]
    pub pool: Option<PoolUpload>,
    #[serde(default)]
    pub pool_id: Option<String>,
    /// Prior predictions, one per candidate.
    #[serde(default)]
    pub priors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub id: usize,
    pub utility: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub session_id: String,
    pub status: SessionStatus,
    pub ranking: Vec<RankedCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub id: usize,
    pub text: Option<String>,
}

/// Screen placement of the queried pair, drawn once per query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub a: CandidateView,
    pub b: CandidateView,
    pub placement: Placement,
    /// Labels still to be collected, this one included.
    pub remaining: usize,
}

/// Body of `POST /v1/sessions/{id}/labels`. `label` is 1 (or `true`) when
/// `a_id` is preferred and 0 (or `false`) when `b_id` is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub a_id: usize,
    pub b_id: usize,
    pub label: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelResponse {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub status: SessionStatus,
    pub labels: usize,
    pub remaining: usize,
    pub ranking: Vec<RankedCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResponse {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub session_id: String,
    pub labels: usize,
    pub ranking: Vec<RankedCandidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingView {
    pub a_id: usize,
    pub b_id: usize,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub session_id: String,
    pub status: SessionStatus,
    pub labels: usize,
    pub max_interactions: usize,
    pub remaining: usize,
    pub iteration: usize,
    pub pending: Option<PendingView>,
    pub config: SessionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: serde_json::Value,
}
