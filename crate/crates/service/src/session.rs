//! A live, human-labelled session: the core state machine plus screen
//! placement and the event log.

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use interank_core::harness::{session_rng, RngStream, SessionStatus};
use interank_core::{CandidatePool, InteractiveSession, LabelSource, PreferenceRecord, PriorPredictions, SessionConfig};

use crate::api::{CandidateView, PendingView, Placement, RankedCandidate, SessionView, SCHEMA_VERSION};
use crate::error::ApiError;
use crate::events::{EventLog, SessionEvent};

/// Read-only view published after every state change, so readers never wait
/// for a refit.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub view: SessionView,
    pub ranking: Vec<RankedCandidate>,
}

pub struct LiveSession {
    id: String,
    session: InteractiveSession,
    priors: Option<Vec<f64>>,
    placement_rng: ChaCha8Rng,
    placement: Option<Placement>,
    log: EventLog,
}

impl LiveSession {
    fn build(
        id: String,
        config: SessionConfig,
        pool: Arc<CandidatePool>,
        priors: Option<Vec<f64>>,
    ) -> Result<Self, ApiError> {
        let prior = match &priors {
            Some(mu) => Some(PriorPredictions::new(mu.clone(), "uploaded")?),
            None => None,
        };
        if let Some(p) = &prior {
            if p.len() != pool.len() {
                return Err(ApiError::validation(format!(
                    "{} priors supplied for {} candidates",
                    p.len(),
                    pool.len()
                )));
            }
        }
        let placement_rng = session_rng(config.seed, RngStream::Placement);
        let session = InteractiveSession::new(config, pool, prior.as_ref())?;
        Ok(LiveSession {
            id,
            session,
            priors,
            placement_rng,
            placement: None,
            log: EventLog::in_memory(),
        })
    }

    /// Starts a session and writes its `created` event, to `log_file` if given.
    pub fn create(
        id: String,
        config: SessionConfig,
        pool: Arc<CandidatePool>,
        priors: Option<Vec<f64>>,
        log_file: Option<PathBuf>,
    ) -> Result<Self, ApiError> {
        let mut live = Self::build(id, config, pool, priors)?;
        if let Some(path) = log_file {
            live.log.attach(path)?;
        }
        let created = SessionEvent::Created {
            schema_version: SCHEMA_VERSION,
            session_id: live.id.clone(),
            config: live.session.config().clone(),
            pool: live.session.pool().as_ref().clone(),
            priors: live.priors.clone(),
        };
        live.log.append(created)?;
        Ok(live)
    }

    /// Rebuilds a session from its events. When `log_file` is given, later
    /// events are appended to it.
    pub fn replay(events: Vec<SessionEvent>, log_file: Option<PathBuf>) -> Result<Self, ApiError> {
        let mut iter = events.into_iter();
        let Some(first @ SessionEvent::Created { .. }) = iter.next() else {
            return Err(ApiError::Internal("event log must start with a created event".into()));
        };
        let SessionEvent::Created { session_id, config, pool, priors, .. } = first.clone() else {
            unreachable!()
        };
        let mut live = Self::build(session_id, config, Arc::new(pool), priors)?;
        live.log.remember(first);
        for event in iter {
            match &event {
                SessionEvent::Created { .. } => {
                    return Err(ApiError::Internal("duplicate created event".into()));
                }
                SessionEvent::Query { a_id, b_id, placement } => {
                    let (pair, p) = live.select()?;
                    if pair != (*a_id, *b_id) || p != *placement {
                        return Err(ApiError::Internal(format!(
                            "replay diverged: logged query ({a_id}, {b_id}), recomputed {pair:?}"
                        )));
                    }
                }
                SessionEvent::Label { a_id, b_id, label } => live.apply_label(*a_id, *b_id, *label)?,
            }
            live.log.remember(event);
        }
        if let Some(path) = log_file {
            live.log.attach(path)?;
        }
        Ok(live)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn inner(&self) -> &InteractiveSession {
        &self.session
    }

    pub fn events(&self) -> &[SessionEvent] {
        self.log.events()
    }

    fn select(&mut self) -> Result<((usize, usize), Placement), ApiError> {
        let pair = self.session.next_pair()?;
        let placement = if self.placement_rng.random::<bool>() {
            Placement { left: pair.0, right: pair.1 }
        } else {
            Placement { left: pair.1, right: pair.0 }
        };
        self.placement = Some(placement);
        Ok((pair, placement))
    }

    /// The pair awaiting a label, selecting one first if none is pending.
    /// Idempotent until the pair is labelled.
    pub fn query(&mut self) -> Result<((usize, usize), Placement), ApiError> {
        match self.session.status() {
            SessionStatus::Complete => Err(ApiError::conflict("session is complete")),
            SessionStatus::AwaitingLabel => {
                let pair = self.session.pending_pair().expect("awaiting a label");
                Ok((pair, self.placement.expect("placement drawn with the pair")))
            }
            SessionStatus::Ready => {
                let (pair, placement) = self.select()?;
                self.log.append(SessionEvent::Query {
                    a_id: pair.0,
                    b_id: pair.1,
                    placement,
                })?;
                Ok((pair, placement))
            }
        }
    }

    fn apply_label(&mut self, a_id: usize, b_id: usize, label: bool) -> Result<(), ApiError> {
        if self.session.status() == SessionStatus::Complete {
            return Err(ApiError::conflict("session is complete"));
        }
        let Some((x, y)) = self.session.pending_pair() else {
            return Err(ApiError::conflict("no pair is awaiting a label; request a query first"));
        };
        if (a_id, b_id) != (x, y) && (a_id, b_id) != (y, x) {
            return Err(ApiError::Conflict {
                message: format!("pair ({a_id}, {b_id}) is not the pending pair"),
                details: serde_json::json!({ "pending": [x, y] }),
            });
        }
        let mut record = PreferenceRecord::new(a_id, b_id, label);
        record.source = LabelSource::Human;
        self.session.submit(record)?;
        if self.session.pending_pair().is_none() {
            self.placement = None;
        } else {
            // The next pair of the batch gets a fresh placement.
            let pair = self.session.pending_pair().expect("checked");
            self.placement = Some(if self.placement_rng.random::<bool>() {
                Placement { left: pair.0, right: pair.1 }
            } else {
                Placement { left: pair.1, right: pair.0 }
            });
        }
        Ok(())
    }

    /// Records a label for the pending pair and refits when its batch is done.
    pub fn label(&mut self, a_id: usize, b_id: usize, label: bool) -> Result<(), ApiError> {
        self.apply_label(a_id, b_id, label)?;
        self.log.append(SessionEvent::Label { a_id, b_id, label })
    }

    pub fn candidate(&self, id: usize) -> CandidateView {
        CandidateView {
            id,
            text: self.session.pool().candidates[id].text.clone(),
        }
    }

    pub fn ranking(&self) -> Vec<RankedCandidate> {
        let scores = self.session.scores();
        self.session
            .ranking()
            .into_iter()
            .map(|id| RankedCandidate {
                id,
                utility: scores[id],
                text: self.session.pool().candidates[id].text.clone(),
            })
            .collect()
    }

    pub fn snapshot(&self) -> Snapshot {
        let s = &self.session;
        let pending = s.pending_pair().map(|(a_id, b_id)| PendingView {
            a_id,
            b_id,
            placement: self.placement.expect("placement drawn with the pair"),
        });
        Snapshot {
            view: SessionView {
                schema_version: SCHEMA_VERSION,
                session_id: self.id.clone(),
                status: s.status(),
                labels: s.data().len(),
                max_interactions: s.config().max_interactions,
                remaining: s.remaining(),
                iteration: s.iteration(),
                pending,
                config: s.config().clone(),
            },
            ranking: self.ranking(),
        }
    }
}
