//! Interactive ranking of candidate texts from pairwise preferences.
//!
//! The crate provides two learners (a linear Bradley–Terry baseline and
//! Gaussian-process preference learning), six pair-selection strategies, a
//! simulated noisy user, ranking metrics and an experiment harness that ties
//! them together.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod numeric;
pub mod domain;
pub mod ingest;
pub mod bt;
pub mod gppl;
pub mod acquisition;
pub mod oracle;
pub mod metrics;
pub mod harness;

pub use domain::{
    Candidate, CandidatePool, GoldScores, LabelSource, PreferenceRecord, PriorPredictions, TrainingSet,
    ValidationIssue, ValidationReport,
};
pub use error::{Error, Result};
pub use acquisition::Strategy;
pub use gppl::{GpPosterior, GpplModel, PairStatistics};
pub use harness::{InteractiveSession, Learner, SessionConfig, SessionResult, WarmStart};
pub use oracle::OracleConfig;
