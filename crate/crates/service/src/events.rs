//! Append-only session event logs. One JSON object per line; replaying the
//! events of a session through [`crate::session::LiveSession::replay`]
//! reconstructs its exact state because every refit is deterministic.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use interank_core::{CandidatePool, SessionConfig};

use crate::api::Placement;
use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum SessionEvent {
    Created {
        schema_version: u32,
        session_id: String,
        config: SessionConfig,
        pool: CandidatePool,
        #[serde(default)]
        priors: Option<Vec<f64>>,
    },
    Query {
        a_id: usize,
        b_id: usize,
        placement: Placement,
    },
    Label {
        a_id: usize,
        b_id: usize,
        label: bool,
    },
}

/// In-memory copy of a session's events, mirrored to a file when the
/// service runs with a log directory.
#[derive(Debug, Default)]
pub struct EventLog {
    events: Vec<SessionEvent>,
    file: Option<(PathBuf, File)>,
}

pub fn log_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.jsonl"))
}

impl EventLog {
    pub fn in_memory() -> Self {
        EventLog::default()
    }

    /// Opens `path` for appending; existing content is kept.
    pub fn attach(&mut self, path: PathBuf) -> Result<(), ApiError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ApiError::Internal(format!("opening {}: {e}", path.display())))?;
        self.file = Some((path, file));
        Ok(())
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn append(&mut self, event: SessionEvent) -> Result<(), ApiError> {
        if let Some((path, file)) = &mut self.file {
            let mut line = serde_json::to_string(&event).map_err(|e| ApiError::Internal(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| ApiError::Internal(format!("writing {}: {e}", path.display())))?;
        }
        self.events.push(event);
        Ok(())
    }

    /// Records an event that is already on disk, e.g. during replay.
    pub(crate) fn remember(&mut self, event: SessionEvent) {
        self.events.push(event);
    }
}

pub fn read_log(path: &Path) -> Result<Vec<SessionEvent>, ApiError> {
    let file = File::open(path).map_err(|e| ApiError::Internal(format!("opening {}: {e}", path.display())))?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ApiError::Internal(format!("reading {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| ApiError::Internal(format!("{}:{}: {e}", path.display(), i + 1)))?;
        events.push(event);
    }
    Ok(events)
}

/// Every `*.jsonl` file in `dir`, sorted by name.
pub fn log_files(dir: &Path) -> Result<Vec<PathBuf>, ApiError> {
    let entries = fs::read_dir(dir).map_err(|e| ApiError::Internal(format!("listing {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}
