//! Tabular export of grid results: one row per (config, pool, repeat, iteration).
//!
//! CSV files start with the comment line `# interank-results v1` followed by
//! the column header. JSONL files start with a header object
//! `{"schema":"interank-results","version":1}` and hold one row object per line.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::GridResults;
use super::session::{Learner, WarmStart};
use crate::acquisition::Strategy;
use crate::error::{Error, Result};

pub const SCHEMA_NAME: &str = "interank-results";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" => Ok(ExportFormat::Jsonl),
            _ => Err(Error::Validation(format!("unknown export format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_index: usize,
    pub pool_index: usize,
    pub topic: String,
    pub repeat: usize,
    pub seed: u64,
    pub learner: Learner,
    pub strategy: Strategy,
    pub warm_start: WarmStart,
    pub max_interactions: usize,
    pub batch_size: usize,
    pub iteration: usize,
    pub labels: usize,
    pub accuracy: f64,
    pub ndcg_at_k: f64,
    pub k: usize,
    pub pearson_r: f64,
}

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    schema: String,
    version: u32,
}

/// Flattens a grid into rows in canonical order. Failed runs contribute the
/// rows of their partial trace.
pub fn result_rows(results: &GridResults) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for run in &results.runs {
        let Some(res) = &run.result else { continue };
        let cfg = &res.config;
        for t in &res.trace {
            rows.push(ResultRow {
                config_index: run.config_index,
                pool_index: run.pool_index,
                topic: results.topics[run.pool_index].clone(),
                repeat: run.repeat,
                seed: cfg.seed,
                learner: cfg.learner,
                strategy: cfg.strategy,
                warm_start: cfg.warm_start,
                max_interactions: cfg.max_interactions,
                batch_size: cfg.batch_size,
                iteration: t.iteration,
                labels: t.labels,
                accuracy: t.accuracy,
                ndcg_at_k: t.ndcg_at_k,
                k: t.k,
                pearson_r: t.pearson_r,
            });
        }
    }
    sort_rows(&mut rows);
    rows
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (a.config_index, a.pool_index, a.repeat, a.iteration).cmp(&(b.config_index, b.pool_index, b.repeat, b.iteration))
    });
}

pub fn rows_to_string(rows: &[ResultRow], format: ExportFormat) -> Result<String> {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    match format {
        ExportFormat::Csv => {
            let mut out = format!("# {SCHEMA_NAME} v{SCHEMA_VERSION}\n").into_bytes();
            {
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
                w.write_record([
                    "config_index",
                    "pool_index",
                    "topic",
                    "repeat",
                    "seed",
                    "learner",
                    "strategy",
                    "warm_start",
                    "max_interactions",
                    "batch_size",
                    "iteration",
                    "labels",
                    "accuracy",
                    "ndcg_at_k",
                    "k",
                    "pearson_r",
                ])
                .map_err(csv_err)?;
                for r in &rows {
                    w.serialize(r).map_err(csv_err)?;
                }
                w.flush().map_err(|e| Error::Validation(e.to_string()))?;
            }
            String::from_utf8(out).map_err(|e| Error::Validation(e.to_string()))
        }
        ExportFormat::Jsonl => {
            let header = JsonlHeader {
                schema: SCHEMA_NAME.into(),
                version: SCHEMA_VERSION,
            };
            let mut out = serde_json::to_string(&header).expect("header serialises");
            out.push('\n');
            for r in &rows {
                out.push_str(&serde_json::to_string(r).expect("row serialises"));
                out.push('\n');
            }
            Ok(out)
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn export_results(rows: &[ResultRow], path: impl AsRef<Path>, format: ExportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = rows_to_string(rows, format)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parses either export format, detected from the first line.
pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let first = text.lines().next().unwrap_or("");
    if first.starts_with('#') {
        let expected = format!("# {SCHEMA_NAME} v{SCHEMA_VERSION}");
        if first.trim() != expected {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {expected:?}"),
            });
        }
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        r.deserialize().map(|row| row.map_err(csv_err)).collect()
    } else {
        let mut lines = BufReader::new(text.as_bytes()).lines();
        let header: JsonlHeader = match lines.next() {
            Some(Ok(l)) => serde_json::from_str(&l).map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        };
        if header.schema != SCHEMA_NAME || header.version != SCHEMA_VERSION {
            return Err(Error::Parse {
                line: 1,
                message: format!("unsupported schema {} v{}", header.schema, header.version),
            });
        }
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let l = l.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            if l.trim().is_empty() {
                continue;
            }
            rows.push(serde_json::from_str(&l).map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?);
        }
        Ok(rows)
    }
}

pub fn import_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: usize, x: f64) -> ResultRow {
        ResultRow {
            config_index: 0,
            pool_index: 0,
            topic: "topic, with \"quotes\"".into(),
            repeat: 0,
            seed: u64::MAX,
            learner: Learner::Gppl,
            strategy: Strategy::Tp,
            warm_start: WarmStart::Prior,
            max_interactions: 3,
            batch_size: 1,
            iteration: i,
            labels: i,
            accuracy: 1.0,
            ndcg_at_k: x,
            k: 5,
            pearson_r: -x / 3.0,
        }
    }

    #[test]
    fn empty_export_is_header_only() {
        let csv = rows_to_string(&[], ExportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(parse_results(&csv).unwrap().is_empty());
        let jsonl = rows_to_string(&[], ExportFormat::Jsonl).unwrap();
        assert_eq!(jsonl.lines().count(), 1);
        assert!(parse_results(&jsonl).unwrap().is_empty());
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![row(0, 0.1 + 0.2), row(1, 1e-300), row(2, std::f64::consts::PI)];
        for fmt in [ExportFormat::Csv, ExportFormat::Jsonl] {
            let text = rows_to_string(&rows, fmt).unwrap();
            assert_eq!(parse_results(&text).unwrap(), rows);
            let mut shuffled = rows.clone();
            shuffled.reverse();
            assert_eq!(rows_to_string(&shuffled, fmt).unwrap(), text);
        }
    }

    #[test]
    fn wrong_version_rejected() {
        assert!(parse_results("# interank-results v2\n").is_err());
        assert!(parse_results("{\"schema\":\"interank-results\",\"version\":9}\n").is_err());
    }
}
