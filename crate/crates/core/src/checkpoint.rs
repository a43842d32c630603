//! Resumable run state, written atomically (temp file then rename) so an
//! interrupted run never leaves a torn checkpoint behind.

use crate::distill::DistillOutcome;
use crate::refine::{PipelineState, RefinedPair, SearcherState};
use crate::mask::ProblemRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const PIPELINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCheckpoint {
    pub pipeline_version: String,
    /// Reproducibility hash of the config; resuming under a different
    /// hash is refused so mixed-config statistics cannot happen.
    pub config_hash: String,
    pub seed: u64,
    pub dataset_fingerprint: String,
    /// Per-problem distillation outcomes, keyed by problem id.
    pub outcomes: BTreeMap<String, DistillOutcome>,
    /// Set once every problem has an outcome.
    pub state: Option<PipelineState>,
    pub searcher_state: Option<SearcherState>,
    /// The refine loop ran to its budget or fixed point.
    #[serde(default)]
    pub refine_done: bool,
    /// Conciseness-passed solved set, once that pass ran.
    pub refined: Option<Vec<RefinedPair>>,
}

impl RunCheckpoint {
    pub fn new(config_hash: String, seed: u64, dataset_fingerprint: String) -> RunCheckpoint {
        RunCheckpoint {
            pipeline_version: PIPELINE_VERSION.into(),
            config_hash,
            seed,
            dataset_fingerprint,
            outcomes: BTreeMap::new(),
            state: None,
            searcher_state: None,
            refine_done: false,
            refined: None,
        }
    }

    pub fn distill_complete(&self, total_records: usize) -> bool {
        self.outcomes.len() == total_records
    }
}

/// Stable digest over the dataset identity: ids, texts and answers.
pub fn dataset_fingerprint(records: &[ProblemRecord]) -> String {
    let mut sorted: Vec<&ProblemRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut hasher = Sha256::new();
    for record in sorted {
        hasher.update(record.id.as_bytes());
        hasher.update([0]);
        hasher.update(record.text.as_bytes());
        hasher.update([0]);
        hasher.update(crate::numeric::rational_string::to_string(&record.answer).as_bytes());
        hasher.update([0xff]);
    }
    format!("{:x}", hasher.finalize())
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("checkpoint {path} does not parse: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("checkpoint was written under a different {what} (checkpoint {found}, current {expected}); refusing to resume")]
    Mismatch {
        what: &'static str,
        found: String,
        expected: String,
    },
}

pub fn save_checkpoint(path: &Path, checkpoint: &RunCheckpoint) -> Result<(), CheckpointError> {
    let io_err = |source: std::io::Error| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut temp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new(),
    }
    .map_err(io_err)?;
    serde_json::to_writer(&mut temp, checkpoint).map_err(|e| {
        io_err(std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
    })?;
    temp.as_file().sync_all().map_err(io_err)?;
    temp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<RunCheckpoint, CheckpointError> {
    let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CheckpointError::Corrupt {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Loads an existing checkpoint and verifies it belongs to this config,
/// dataset and seed; a missing file yields a fresh checkpoint.
pub fn load_or_init(
    path: &Path,
    config_hash: &str,
    seed: u64,
    fingerprint: &str,
) -> Result<RunCheckpoint, CheckpointError> {
    if !path.exists() {
        return Ok(RunCheckpoint::new(config_hash.into(), seed, fingerprint.into()));
    }
    let checkpoint = load_checkpoint(path)?;
    if checkpoint.config_hash != config_hash {
        return Err(CheckpointError::Mismatch {
            what: "config",
            found: checkpoint.config_hash,
            expected: config_hash.into(),
        });
    }
    if checkpoint.dataset_fingerprint != fingerprint {
        return Err(CheckpointError::Mismatch {
            what: "dataset",
            found: checkpoint.dataset_fingerprint,
            expected: fingerprint.into(),
        });
    }
    if checkpoint.seed != seed {
        return Err(CheckpointError::Mismatch {
            what: "seed",
            found: checkpoint.seed.to_string(),
            expected: seed.to_string(),
        });
    }
    Ok(checkpoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    fn record(id: &str) -> ProblemRecord {
        ProblemRecord {
            id: id.into(),
            text: format!("{id} has 3 things"),
            answer: BigRational::from_integer(3.into()),
            reference_equation: None,
        }
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let checkpoint = RunCheckpoint::new("hash".into(), 7, "fp".into());
        save_checkpoint(&path, &checkpoint).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, checkpoint);
    }

    #[test]
    fn fingerprint_is_order_insensitive_and_content_sensitive() {
        let a = [record("x"), record("y")];
        let b = [record("y"), record("x")];
        assert_eq!(dataset_fingerprint(&a), dataset_fingerprint(&b));
        let mut changed = record("x");
        changed.text = "different".into();
        let c = [changed, record("y")];
        assert_ne!(dataset_fingerprint(&a), dataset_fingerprint(&c));
    }

    #[test]
    fn resume_refuses_config_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        save_checkpoint(&path, &RunCheckpoint::new("old".into(), 7, "fp".into())).unwrap();
        let err = load_or_init(&path, "new", 7, "fp").unwrap_err();
        assert!(matches!(err, CheckpointError::Mismatch { what: "config", .. }));
    }

    #[test]
    fn resume_refuses_seed_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        save_checkpoint(&path, &RunCheckpoint::new("h".into(), 7, "fp".into())).unwrap();
        let err = load_or_init(&path, "h", 8, "fp").unwrap_err();
        assert!(matches!(err, CheckpointError::Mismatch { what: "seed", .. }));
    }

    #[test]
    fn missing_file_initializes_fresh() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("absent.json");
        let checkpoint = load_or_init(&path, "h", 1, "fp").unwrap();
        assert!(checkpoint.outcomes.is_empty());
    }
}
