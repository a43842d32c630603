//! End-to-end orchestration shared by the CLI and the integration
//! tests: resumable distillation in checkpointed batches, the
//! checkpointed refine loop, export, and offline re-validation of
//! exported training sets.

use crate::checkpoint::{
    dataset_fingerprint, load_or_init, save_checkpoint, CheckpointError, RunCheckpoint,
};
use crate::config::{ConfigError, PipelineConfig};
use crate::dataset::Supervision;
use crate::distill::{collect_run, run_problems, ChatClient, DistillOutcome, DistillStatus, SolvedPair};
use crate::export::{ExportError, TrainingRecord};
use crate::mask::{mask_problem, ProblemRecord};
use crate::refine::{
    conciseness_pass, refine_iteration, PipelineState, RefinedPair, Searcher,
};
use crate::validate::{format_check_with, result_check_with};
use crate::equation::{lex_raw, parse_raw, Equation, MaskNotation};
use crate::SurfaceSyntax;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("distillation has not completed for this checkpoint")]
    DistillIncomplete,
    #[error("no solved pairs to fit the initial searcher on")]
    EmptySeedData,
}

/// Inputs of a (resumable) distillation run.
pub struct DistillJob<'a> {
    pub records: &'a [ProblemRecord],
    pub client: &'a dyn ChatClient,
    pub config: &'a PipelineConfig,
    pub checkpoint_path: &'a Path,
    /// Per-problem transcripts are written here for audit, when given.
    pub transcript_dir: Option<&'a Path>,
    pub seed: u64,
    pub concurrency: usize,
    /// Stop (checkpointing normally) after this many newly processed
    /// problems; the next invocation resumes where this one stopped.
    pub stop_after: Option<usize>,
}

/// Runs distillation over every record that has no outcome yet, in
/// id-sorted batches, checkpointing after each batch. Builds the
/// solved/unsolved partition once all records are processed.
pub fn run_distill(job: DistillJob) -> Result<RunCheckpoint, PipelineError> {
    let config_hash = job.config.reproducibility_hash();
    let fingerprint = dataset_fingerprint(job.records);
    let mut checkpoint = load_or_init(job.checkpoint_path, &config_hash, job.seed, &fingerprint)?;

    let distill_cfg = job.config.distill_config()?;
    let mut pending: Vec<&ProblemRecord> = job
        .records
        .iter()
        .filter(|r| !checkpoint.outcomes.contains_key(&r.id))
        .collect();
    pending.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(limit) = job.stop_after {
        pending.truncate(limit);
    }

    let batch_size = job.config.pipeline.checkpoint_batch.max(1);
    for batch in pending.chunks(batch_size) {
        let owned: Vec<ProblemRecord> = batch.iter().map(|r| (*r).clone()).collect();
        let outcomes = run_problems(
            &owned,
            job.client,
            &job.config.prompts,
            &distill_cfg,
            job.concurrency,
        );
        for outcome in outcomes {
            if let Some(dir) = job.transcript_dir {
                write_transcript(dir, &outcome)?;
            }
            checkpoint.outcomes.insert(outcome.problem_id.clone(), outcome);
        }
        save_checkpoint(job.checkpoint_path, &checkpoint)?;
    }

    if checkpoint.distill_complete(job.records.len()) && checkpoint.state.is_none() {
        checkpoint.state = Some(build_state(job.records, &checkpoint.outcomes));
        save_checkpoint(job.checkpoint_path, &checkpoint)?;
    }
    Ok(checkpoint)
}

fn write_transcript(dir: &Path, outcome: &DistillOutcome) -> Result<(), PipelineError> {
    let io_err = |path: &PathBuf, source: std::io::Error| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(&dir.to_path_buf(), e))?;
    let path = dir.join(format!("{}.json", outcome.problem_id));
    let data = serde_json::to_string_pretty(&outcome.transcript).expect("serializable transcript");
    std::fs::write(&path, data).map_err(|e| io_err(&path, e))
}

/// Rebuilds the solved/unsolved partition from per-problem outcomes, in
/// input record order.
fn build_state(
    records: &[ProblemRecord],
    outcomes: &BTreeMap<String, DistillOutcome>,
) -> PipelineState {
    let ordered: Vec<DistillOutcome> = records
        .iter()
        .map(|r| outcomes.get(&r.id).cloned().expect("outcome per record"))
        .collect();
    let run = collect_run(records, ordered);
    PipelineState::new(run.solved, run.unsolved)
}

/// Inputs of a (resumable) refine run over an existing checkpoint.
pub struct RefineJob<'a> {
    pub config: &'a PipelineConfig,
    pub searcher: &'a dyn Searcher,
    pub checkpoint_path: &'a Path,
    pub seed: u64,
    /// Override of config max_iterations, when set.
    pub iterations: Option<u32>,
    /// Stop after this many sweeps in this invocation.
    pub stop_after_iterations: Option<u32>,
    /// Skip the conciseness pass regardless of config.
    pub skip_conciseness: bool,
}

/// Continues the refine loop from the checkpoint: fits the searcher if
/// no searcher state exists yet, sweeps until the iteration budget or a
/// fixed point, then runs the conciseness pass once the loop is done.
/// Every sweep is checkpointed, so long runs resume mid-loop.
pub fn run_refine_checkpointed(job: RefineJob) -> Result<RunCheckpoint, PipelineError> {
    let mut checkpoint = crate::checkpoint::load_checkpoint(job.checkpoint_path)?;
    let mut state = checkpoint.state.clone().ok_or(PipelineError::DistillIncomplete)?;

    let mut refine_cfg = job.config.refine_config(job.seed);
    if let Some(n) = job.iterations {
        refine_cfg.max_iterations = n;
    }
    if job.skip_conciseness {
        refine_cfg.conciseness_pass = false;
    }
    let check = job.config.check_config()?;

    let mut theta = match checkpoint.searcher_state.clone() {
        Some(theta) => theta,
        None => {
            if state.solved.is_empty() {
                return Err(PipelineError::EmptySeedData);
            }
            let theta = job.searcher.fit(&state.solved, refine_cfg.seed);
            checkpoint.searcher_state = Some(theta.clone());
            save_checkpoint(job.checkpoint_path, &checkpoint)?;
            theta
        }
    };

    let mut sweeps_this_run = 0;
    while !checkpoint.refine_done && state.iteration < refine_cfg.max_iterations {
        if job
            .stop_after_iterations
            .is_some_and(|limit| sweeps_this_run >= limit)
        {
            return Ok(checkpoint);
        }
        let step = refine_iteration(&state, &theta, job.searcher, &refine_cfg, &check);
        state = step.state;
        theta = step.searcher_state;
        sweeps_this_run += 1;
        if step.moved == 0 {
            checkpoint.refine_done = true;
        }
        checkpoint.state = Some(state.clone());
        checkpoint.searcher_state = Some(theta.clone());
        save_checkpoint(job.checkpoint_path, &checkpoint)?;
    }
    if state.iteration >= refine_cfg.max_iterations {
        checkpoint.refine_done = true;
    }

    if checkpoint.refine_done && refine_cfg.conciseness_pass && checkpoint.refined.is_none() {
        let refined = conciseness_pass(&state.solved, &theta, job.searcher, &refine_cfg, &check);
        checkpoint.refined = Some(refined);
        checkpoint.state = Some(state);
        save_checkpoint(job.checkpoint_path, &checkpoint)?;
    } else {
        checkpoint.state = Some(state);
        save_checkpoint(job.checkpoint_path, &checkpoint)?;
    }
    Ok(checkpoint)
}

/// The final training rows of a checkpoint: the conciseness-passed
/// solved set (or the solved set as-is when the pass did not run) plus
/// everything the refine loop harvested.
pub fn final_training_rows(checkpoint: &RunCheckpoint) -> Result<(Vec<RefinedPair>, Vec<SolvedPair>), PipelineError> {
    let state = checkpoint.state.as_ref().ok_or(PipelineError::DistillIncomplete)?;
    let refined = match &checkpoint.refined {
        Some(refined) => refined.clone(),
        None => state
            .solved
            .iter()
            .map(|pair| RefinedPair {
                pair: pair.clone(),
                shortened: false,
            })
            .collect(),
    };
    Ok((refined, state.harvested.clone()))
}

/// One re-validation finding.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub id: String,
    pub reason: String,
}

/// Re-checks an exported training set against the source dataset:
/// every row must belong to a known problem, reproduce its masked text,
/// satisfy the token alphabet for that problem's mask count, and pass
/// the answer check.
pub fn validate_training_set(
    rows: &[TrainingRecord],
    records: &[ProblemRecord],
    config: &PipelineConfig,
) -> Result<Vec<Violation>, PipelineError> {
    let check = config.check_config()?;
    let by_id: BTreeMap<&str, &ProblemRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut violations = Vec::new();
    for row in rows {
        let Some(record) = by_id.get(row.id.as_str()) else {
            violations.push(Violation {
                id: row.id.clone(),
                reason: "no such problem in the dataset".into(),
            });
            continue;
        };
        let masked = mask_problem(record);
        if masked.masked_text != row.masked_text {
            violations.push(Violation {
                id: row.id.clone(),
                reason: "masked text does not match the dataset".into(),
            });
            continue;
        }
        let report = format_check_with(&row.equation, masked.mask_count(), &check);
        if !report.format_ok {
            violations.push(Violation {
                id: row.id.clone(),
                reason: format!("format check failed ({:?})", report.error),
            });
            continue;
        }
        let equation = match parse_row_equation(&row.equation) {
            Some(eq) => eq,
            None => {
                violations.push(Violation {
                    id: row.id.clone(),
                    reason: "equation does not parse".into(),
                });
                continue;
            }
        };
        if !result_check_with(&equation, &masked.slots, &record.answer, &check) {
            violations.push(Violation {
                id: row.id.clone(),
                reason: "result check failed".into(),
            });
        }
    }
    Ok(violations)
}

fn parse_row_equation(text: &str) -> Option<Equation> {
    let tokens: Vec<_> = lex_raw(text, MaskNotation::Any)
        .ok()?
        .into_iter()
        .map(|(tok, _)| tok)
        .collect();
    let raw = parse_raw(&tokens).ok()?;
    Equation::from_raw(&raw, None).ok()
}

/// Masked-dataset row written by the preprocess command.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MaskedRow {
    pub id: String,
    pub masked_text: String,
    pub mask_count: usize,
    pub answer: String,
}

pub fn preprocess_rows(records: &[ProblemRecord]) -> Vec<MaskedRow> {
    let mut rows: Vec<MaskedRow> = records
        .iter()
        .map(|record| {
            let masked = mask_problem(record);
            MaskedRow {
                id: record.id.clone(),
                masked_text: masked.masked_text,
                mask_count: masked.slots.len(),
                answer: crate::numeric::rational_string::to_string(&record.answer),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    rows
}

/// Records loaded for a run are processed in id order everywhere, so
/// exports and checkpoints do not depend on file order.
pub fn sort_records(mut records: Vec<ProblemRecord>) -> Vec<ProblemRecord> {
    records.sort_by(|a, b| a.id.cmp(&b.id));
    records
}

/// Strips supervision that must not leak into a weak run.
pub fn enforce_supervision(records: &mut [ProblemRecord], supervision: Supervision) {
    if supervision == Supervision::Weak {
        for record in records {
            record.reference_equation = None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::{MockChatClient, MockTurn};
    use num::BigRational;
    use std::collections::HashMap;

    fn record(id: &str, text: &str, answer: i64) -> ProblemRecord {
        ProblemRecord {
            id: id.into(),
            text: text.into(),
            answer: BigRational::from_integer(answer.into()),
            reference_equation: None,
        }
    }

    fn simple_scripts(ids: &[(&str, &str)]) -> MockChatClient {
        let mut scripts = HashMap::new();
        for (id, equation) in ids {
            scripts.insert(
                id.to_string(),
                vec![MockTurn::reply("reasoning"), MockTurn::reply(equation)],
            );
        }
        MockChatClient::from_scripts(scripts)
    }

    #[test]
    fn distill_run_checkpoint_and_resume_match() {
        let records = vec![
            record("a", "x 3 y 4", 7),
            record("b", "x 5 y 6", 30),
            record("c", "x 2 y 9", 11),
        ];
        let config = PipelineConfig::default();
        let dir = tempfile::tempdir().unwrap();

        // Uninterrupted run.
        let full_path = dir.path().join("full.json");
        let client = simple_scripts(&[("a", "x = 3 + 4"), ("b", "x = 5 * 6"), ("c", "x = 2 + 9")]);
        let full = run_distill(DistillJob {
            records: &records,
            client: &client,
            config: &config,
            checkpoint_path: &full_path,
            transcript_dir: None,
            seed: 1,
            concurrency: 2,
            stop_after: None,
        })
        .unwrap();
        assert!(full.state.is_some());
        assert_eq!(full.outcomes.len(), 3);

        // Interrupted after one problem, then resumed.
        let resumed_path = dir.path().join("resumed.json");
        let client = simple_scripts(&[("a", "x = 3 + 4"), ("b", "x = 5 * 6"), ("c", "x = 2 + 9")]);
        let partial = run_distill(DistillJob {
            records: &records,
            client: &client,
            config: &config,
            checkpoint_path: &resumed_path,
            transcript_dir: None,
            seed: 1,
            concurrency: 2,
            stop_after: Some(1),
        })
        .unwrap();
        assert_eq!(partial.outcomes.len(), 1);
        assert!(partial.state.is_none());
        let resumed = run_distill(DistillJob {
            records: &records,
            client: &client,
            config: &config,
            checkpoint_path: &resumed_path,
            transcript_dir: None,
            seed: 1,
            concurrency: 2,
            stop_after: None,
        })
        .unwrap();
        assert_eq!(resumed.outcomes, full.outcomes);
        assert_eq!(resumed.state, full.state);
    }

    #[test]
    fn validate_catches_corrupted_equation() {
        let records = vec![record("a", "x 3 y 4", 7)];
        let rows = vec![
            TrainingRecord {
                id: "a".into(),
                masked_text: mask_problem(&records[0]).masked_text,
                equation: "[Mask1]+[Mask2]".into(),
                provenance: crate::distill::Provenance::DistillStage1,
            },
            TrainingRecord {
                id: "a".into(),
                masked_text: mask_problem(&records[0]).masked_text,
                equation: "[Mask1]*[Mask2]".into(), // 12, not 7
                provenance: crate::distill::Provenance::DistillStage1,
            },
        ];
        let config = PipelineConfig::default();
        let violations = validate_training_set(&rows, &records, &config).unwrap();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].id, "a");
        assert!(violations[0].reason.contains("result check"));
    }

    #[test]
    fn validate_flags_unknown_ids_and_bad_masks() {
        let records = vec![record("a", "x 3 y 4", 7)];
        let config = PipelineConfig::default();
        let rows = vec![
            TrainingRecord {
                id: "ghost".into(),
                masked_text: "whatever".into(),
                equation: "[Mask1]".into(),
                provenance: crate::distill::Provenance::Refine,
            },
            TrainingRecord {
                id: "a".into(),
                masked_text: mask_problem(&records[0]).masked_text,
                equation: "[Mask1]+[Mask9]".into(),
                provenance: crate::distill::Provenance::Refine,
            },
        ];
        let violations = validate_training_set(&rows, &records, &config).unwrap();
        assert_eq!(violations.len(), 2);
        assert!(violations[0].reason.contains("no such problem"));
        assert!(violations[1].reason.contains("format check"));
    }
}
