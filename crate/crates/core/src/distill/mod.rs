//! Dialogue orchestration: per problem, up to three fresh search
//! attempts; each attempt runs an equation-generation round over the
//! concrete question, then (if that fails) a mask-equation round over
//! the masked question in the same conversation. Any candidate failing
//! the format check enters a correction dialogue of at most five rounds.
//! Accepted equations must pass both the format check and the answer
//! check.

mod client;
mod mock;
mod prompts;

pub use client::{ChatClient, ChatMessage, ClientError, HttpChatClient, RateLimiter, Role, SendOptions};
pub use mock::{MockChatClient, MockTurn};
pub use prompts::PromptTemplates;

use crate::mask::{mask_problem, MaskedProblem, ProblemRecord};
use crate::numeric::rational_string;
use crate::validate::{check_candidate, CheckConfig};
use crate::Equation;
use serde::{Deserialize, Serialize};

/// Where a solved pair came from. Corrections are attributed separately
/// from the stage they rescued, matching the three-way recall split of
/// the distillation phase; refinement adds the last two sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    DistillStage1,
    DistillStage2,
    DistillCorrection,
    Refine,
    ConcisenessReplaced,
}

/// The two dialogue rounds of one search attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    EquationGeneration,
    MaskEquationGeneration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptStatus {
    Accepted,
    FormatTimeout,
    ResultFail,
    Unclassifiable,
}

/// One stage of one attempt: the final candidate text, how many
/// correction rounds it consumed, and how it ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptResult {
    pub stage: Stage,
    /// Fresh-attempt index, 1-based.
    pub iteration: u32,
    pub raw_text: String,
    pub equation: Option<Equation>,
    pub corrections_used: u32,
    pub status: AttemptStatus,
    /// The answer check failed by less than the near-miss ceiling.
    #[serde(default)]
    pub near_miss: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillStatus {
    Success,
    Unsuccessful,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub attempt: u32,
    pub stage: Stage,
    pub role: Role,
    pub text: String,
}

/// Everything recorded about one problem's distillation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillOutcome {
    pub problem_id: String,
    pub status: DistillStatus,
    /// Mask-form equation; present iff status is `Success`.
    pub equation: Option<Equation>,
    pub provenance: Option<Provenance>,
    pub transcript: Vec<TranscriptEntry>,
    pub attempts: Vec<AttemptResult>,
    /// The run was aborted by a client failure that retries could not
    /// clear, rather than by exhausting the search budget.
    #[serde(default)]
    pub client_failure: bool,
}

impl DistillOutcome {
    pub fn near_misses(&self) -> u32 {
        self.attempts.iter().filter(|a| a.near_miss).count() as u32
    }
}

/// An accepted problem-equation pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedPair {
    pub masked: MaskedProblem,
    pub equation: Equation,
    pub provenance: Provenance,
}

/// Budgets and sampling parameters of the dialogue loop.
#[derive(Debug, Clone)]
pub struct DistillConfig {
    /// Fresh search attempts per problem.
    pub max_attempts: u32,
    /// Correction rounds per stage attempt.
    pub max_corrections: u32,
    pub fresh_temperature: f64,
    pub correction_temperature: f64,
    /// Retries for transport-level client failures (not counted against
    /// the attempt budget).
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub check: CheckConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            max_attempts: 3,
            max_corrections: 5,
            fresh_temperature: 0.7,
            correction_temperature: 0.0,
            max_retries: 3,
            retry_backoff_ms: 500,
            check: CheckConfig::default(),
        }
    }
}

/// Success counts by attributed stage; the three stage counts sum to
/// the number of solved problems, so stage recalls decompose the total
/// recall exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub equation_generation: u64,
    pub mask_equation_generation: u64,
    pub format_correction: u64,
    pub near_misses: u64,
}

impl StageStats {
    pub fn total_successes(&self) -> u64 {
        self.equation_generation + self.mask_equation_generation + self.format_correction
    }

    pub fn record(&mut self, outcome: &DistillOutcome) {
        match outcome.provenance {
            Some(Provenance::DistillStage1) => self.equation_generation += 1,
            Some(Provenance::DistillStage2) => self.mask_equation_generation += 1,
            Some(Provenance::DistillCorrection) => self.format_correction += 1,
            _ => {}
        }
        self.near_misses += outcome.near_misses() as u64;
    }
}

struct Dialogue<'a> {
    client: &'a dyn ChatClient,
    cfg: &'a DistillConfig,
    tag: String,
    conversation: Vec<ChatMessage>,
    transcript: Vec<TranscriptEntry>,
    attempt: u32,
    stage: Stage,
}

impl<'a> Dialogue<'a> {
    /// Sends one user message and appends both sides to the transcript.
    /// Transport-level failures are retried with exponential backoff.
    fn exchange(&mut self, prompt: String, temperature: f64) -> Result<String, ClientError> {
        self.conversation.push(ChatMessage::user(prompt.clone()));
        self.transcript.push(TranscriptEntry {
            attempt: self.attempt,
            stage: self.stage,
            role: Role::User,
            text: prompt,
        });
        let options = SendOptions {
            temperature,
            tag: self.tag.clone(),
        };
        let mut delay = self.cfg.retry_backoff_ms;
        let mut retries = 0;
        let reply = loop {
            match self.client.send(&self.conversation, &options) {
                Ok(reply) => break reply,
                Err(e) if e.retryable() && retries < self.cfg.max_retries => {
                    std::thread::sleep(std::time::Duration::from_millis(delay));
                    delay = delay.saturating_mul(2);
                    retries += 1;
                }
                Err(e) => return Err(e),
            }
        };
        self.conversation.push(ChatMessage::assistant(reply.clone()));
        self.transcript.push(TranscriptEntry {
            attempt: self.attempt,
            stage: self.stage,
            role: Role::Assistant,
            text: reply.clone(),
        });
        Ok(reply)
    }
}

/// Runs one stage attempt: opener prompt, equation extraction, then the
/// check-and-correct loop over the extracted candidate.
fn run_stage(
    dialogue: &mut Dialogue,
    masked: &MaskedProblem,
    templates: &PromptTemplates,
) -> Result<AttemptResult, ClientError> {
    let cfg = dialogue.cfg;
    let opener = match dialogue.stage {
        Stage::EquationGeneration => templates.render_cot_solve(
            &masked.problem.text,
            &rational_string::to_string(&masked.problem.answer),
        ),
        Stage::MaskEquationGeneration => templates.render_mask_solve(&masked.masked_text),
    };
    dialogue.exchange(opener, cfg.fresh_temperature)?;
    let mut candidate = dialogue.exchange(templates.extract_knowledge.clone(), cfg.fresh_temperature)?;

    let mut corrections_used = 0;
    loop {
        let check = check_candidate(
            &candidate,
            &masked.slots,
            &masked.problem.answer,
            &cfg.check,
        );
        if check.report.format_ok {
            let result_ok = check.report.result_ok == Some(true);
            let near_miss = check.near_miss(&masked.problem.answer, &cfg.check);
            return Ok(AttemptResult {
                stage: dialogue.stage,
                iteration: dialogue.attempt,
                raw_text: candidate,
                equation: check.equation,
                corrections_used,
                status: if result_ok {
                    AttemptStatus::Accepted
                } else {
                    AttemptStatus::ResultFail
                },
                near_miss,
            });
        }
        if corrections_used >= cfg.max_corrections {
            let status = if check.classification.is_none() {
                AttemptStatus::Unclassifiable
            } else {
                AttemptStatus::FormatTimeout
            };
            return Ok(AttemptResult {
                stage: dialogue.stage,
                iteration: dialogue.attempt,
                raw_text: candidate,
                equation: None,
                corrections_used,
                status,
                near_miss: false,
            });
        }
        // Unclassifiable failures still consume the budget, with a
        // generic reformat instruction.
        let prompt = templates.render_correction(check.classification.as_ref(), &candidate);
        corrections_used += 1;
        candidate = dialogue.exchange(prompt, cfg.correction_temperature)?;
    }
}

/// Stage 1 in isolation: chain-of-thought solve over the concrete
/// question, then extraction and checks.
pub fn generate_equation(
    record: &ProblemRecord,
    client: &dyn ChatClient,
    templates: &PromptTemplates,
    cfg: &DistillConfig,
) -> Result<AttemptResult, ClientError> {
    let masked = mask_problem(record);
    let mut dialogue = Dialogue {
        client,
        cfg,
        tag: record.id.clone(),
        conversation: Vec::new(),
        transcript: Vec::new(),
        attempt: 1,
        stage: Stage::EquationGeneration,
    };
    run_stage(&mut dialogue, &masked, templates)
}

/// Stage 2 in isolation, continuing an existing conversation (the
/// stage-1 context), against the masked question.
pub fn generate_mask_equation(
    conversation: Vec<ChatMessage>,
    masked: &MaskedProblem,
    client: &dyn ChatClient,
    templates: &PromptTemplates,
    cfg: &DistillConfig,
) -> Result<AttemptResult, ClientError> {
    let mut dialogue = Dialogue {
        client,
        cfg,
        tag: masked.problem.id.clone(),
        conversation,
        transcript: Vec::new(),
        attempt: 1,
        stage: Stage::MaskEquationGeneration,
    };
    run_stage(&mut dialogue, masked, templates)
}

/// Full per-problem search: attempts run until one stage is accepted or
/// the attempt budget is exhausted. Client failures that survive the
/// retry policy abort the problem and set `client_failure`.
pub fn distill_problem(
    record: &ProblemRecord,
    client: &dyn ChatClient,
    templates: &PromptTemplates,
    cfg: &DistillConfig,
) -> DistillOutcome {
    let masked = mask_problem(record);
    let mut attempts = Vec::new();
    let mut transcript = Vec::new();
    let mut client_failure = false;

    'search: for attempt in 1..=cfg.max_attempts {
        let mut dialogue = Dialogue {
            client,
            cfg,
            tag: record.id.clone(),
            conversation: Vec::new(),
            transcript: Vec::new(),
            attempt,
            stage: Stage::EquationGeneration,
        };
        for stage in [Stage::EquationGeneration, Stage::MaskEquationGeneration] {
            dialogue.stage = stage;
            match run_stage(&mut dialogue, &masked, templates) {
                Ok(result) => {
                    let accepted = result.status == AttemptStatus::Accepted;
                    let equation = result.equation.clone();
                    let corrections = result.corrections_used;
                    attempts.push(result);
                    if accepted {
                        transcript.append(&mut dialogue.transcript);
                        let provenance = if corrections > 0 {
                            Provenance::DistillCorrection
                        } else {
                            match stage {
                                Stage::EquationGeneration => Provenance::DistillStage1,
                                Stage::MaskEquationGeneration => Provenance::DistillStage2,
                            }
                        };
                        return DistillOutcome {
                            problem_id: record.id.clone(),
                            status: DistillStatus::Success,
                            equation,
                            provenance: Some(provenance),
                            transcript,
                            attempts,
                            client_failure: false,
                        };
                    }
                }
                Err(_) => {
                    client_failure = true;
                    transcript.append(&mut dialogue.transcript);
                    break 'search;
                }
            }
        }
        transcript.append(&mut dialogue.transcript);
    }

    DistillOutcome {
        problem_id: record.id.clone(),
        status: DistillStatus::Unsuccessful,
        equation: None,
        provenance: None,
        transcript,
        attempts,
        client_failure,
    }
}

/// Result of distilling a whole dataset: the solved pairs, the unsolved
/// remainder, the full per-problem outcomes, and stage-attributed
/// success counts.
#[derive(Debug, Clone)]
pub struct DistillRun {
    pub solved: Vec<SolvedPair>,
    pub unsolved: Vec<ProblemRecord>,
    pub outcomes: Vec<DistillOutcome>,
    pub stats: StageStats,
}

/// Distills `records` with up to `concurrency` problems in flight.
/// Outcomes keep the input order regardless of scheduling.
pub fn distill_dataset(
    records: &[ProblemRecord],
    client: &dyn ChatClient,
    templates: &PromptTemplates,
    cfg: &DistillConfig,
    concurrency: usize,
) -> DistillRun {
    let outcomes = run_problems(records, client, templates, cfg, concurrency);
    collect_run(records, outcomes)
}

pub(crate) fn run_problems(
    records: &[ProblemRecord],
    client: &dyn ChatClient,
    templates: &PromptTemplates,
    cfg: &DistillConfig,
    concurrency: usize,
) -> Vec<DistillOutcome> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .expect("worker pool");
    pool.install(|| {
        records
            .par_iter()
            .map(|record| distill_problem(record, client, templates, cfg))
            .collect()
    })
}

pub(crate) fn collect_run(records: &[ProblemRecord], outcomes: Vec<DistillOutcome>) -> DistillRun {
    let mut solved = Vec::new();
    let mut unsolved = Vec::new();
    let mut stats = StageStats::default();
    for (record, outcome) in records.iter().zip(&outcomes) {
        stats.record(outcome);
        match (&outcome.status, &outcome.equation) {
            (DistillStatus::Success, Some(eq)) => solved.push(SolvedPair {
                masked: mask_problem(record),
                equation: eq.clone(),
                provenance: outcome.provenance.unwrap_or(Provenance::DistillStage1),
            }),
            _ => unsolved.push(record.clone()),
        }
    }
    DistillRun {
        solved,
        unsolved,
        outcomes,
        stats,
    }
}
