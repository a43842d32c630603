//! Iterative refinement of the unsolved remainder.
//!
//! A searcher is fitted on the solved pairs, then repeatedly
//! beam-searches every unsolved problem; the shortest candidate passing
//! the answer check is harvested and the searcher refitted on everything
//! solved so far. The loop runs for a configured number of iterations or
//! until an iteration moves nothing. A final conciseness pass re-infers
//! the originally solved set and keeps the shorter of the original and
//! the best newly found equation.

mod combinatorial;

pub use combinatorial::CombinatorialSearcher;

use crate::distill::{Provenance, SolvedPair};
use crate::mask::{mask_problem, MaskedProblem, NumberSlot, ProblemRecord};
use crate::validate::{result_check_with, CheckConfig};
use crate::{Equation, SurfaceSyntax};
use num::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque, serializable searcher state; `version` names the producing
/// implementation and payload layout so checkpoints fail loudly when
/// loaded by a different searcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearcherState {
    pub version: String,
    pub payload: serde_json::Value,
}

/// The trainable middle searcher. A neural implementation (fit =
/// fine-tune, beam_search = decoder beam) drops in behind the same
/// interface; this crate ships a deterministic combinatorial one.
pub trait Searcher: Send + Sync {
    /// Deterministic for identical pairs and seed.
    fn fit(&self, pairs: &[SolvedPair], seed: u64) -> SearcherState;

    /// Up to `width` candidates, each parseable and alphabet-compliant
    /// for the problem's mask count, ordered by model score.
    fn beam_search(
        &self,
        state: &SearcherState,
        masked: &MaskedProblem,
        width: usize,
    ) -> Vec<Equation>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineConfig {
    pub beam_width: usize,
    pub max_iterations: u32,
    pub seed: u64,
    /// Run the final re-inference pass over the solved set.
    pub conciseness_pass: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            beam_width: 5,
            max_iterations: 5,
            seed: 0,
            conciseness_pass: true,
        }
    }
}

/// The evolving partition of the dataset: distillation successes,
/// still-unsolved records, and refine-harvested pairs. The three parts
/// reference disjoint problem ids whose union never changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub solved: Vec<SolvedPair>,
    pub unsolved: Vec<ProblemRecord>,
    pub harvested: Vec<SolvedPair>,
    pub iteration: u32,
}

impl PipelineState {
    pub fn new(solved: Vec<SolvedPair>, unsolved: Vec<ProblemRecord>) -> PipelineState {
        PipelineState {
            solved,
            unsolved,
            harvested: Vec::new(),
            iteration: 0,
        }
    }

    pub fn total_problems(&self) -> usize {
        self.solved.len() + self.unsolved.len() + self.harvested.len()
    }

    /// All problem ids across the three parts, sorted.
    pub fn all_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .solved
            .iter()
            .map(|p| p.masked.problem.id.clone())
            .chain(self.unsolved.iter().map(|r| r.id.clone()))
            .chain(self.harvested.iter().map(|p| p.masked.problem.id.clone()))
            .collect();
        ids.sort();
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefineError {
    #[error("no solved pairs to fit the initial searcher on")]
    EmptySeedData,
}

/// Filters `candidates` by the answer check and returns the shortest by
/// token length; equal lengths break by lexicographic order of the
/// bracket rendering.
pub fn select_shortest(
    candidates: &[Equation],
    slots: &[NumberSlot],
    answer: &BigRational,
    check: &CheckConfig,
) -> Option<Equation> {
    candidates
        .iter()
        .filter(|eq| result_check_with(eq, slots, answer, check))
        .min_by(|a, b| {
            a.token_length()
                .cmp(&b.token_length())
                .then_with(|| a.render(SurfaceSyntax::Bracket).cmp(&b.render(SurfaceSyntax::Bracket)))
        })
        .cloned()
}

/// Result of one sweep over the unsolved set.
pub struct RefineStep {
    pub state: PipelineState,
    pub searcher_state: SearcherState,
    pub moved: usize,
}

/// One sweep: beam-search every unsolved record, harvest shortest
/// passing candidates, then refit the searcher on everything solved so
/// far. Searches run concurrently against the immutable searcher state;
/// harvests are applied in a single deterministic merge afterwards.
pub fn refine_iteration(
    state: &PipelineState,
    searcher_state: &SearcherState,
    searcher: &dyn Searcher,
    cfg: &RefineConfig,
    check: &CheckConfig,
) -> RefineStep {
    let found: Vec<Option<Equation>> = state
        .unsolved
        .par_iter()
        .map(|record| {
            let masked = mask_problem(record);
            let beam = searcher.beam_search(searcher_state, &masked, cfg.beam_width);
            select_shortest(&beam, &masked.slots, &record.answer, check)
        })
        .collect();

    let mut next = state.clone();
    next.unsolved = Vec::with_capacity(state.unsolved.len());
    let mut moved = 0;
    for (record, hit) in state.unsolved.iter().zip(found) {
        match hit {
            Some(equation) => {
                next.harvested.push(SolvedPair {
                    masked: mask_problem(record),
                    equation,
                    provenance: Provenance::Refine,
                });
                moved += 1;
            }
            None => next.unsolved.push(record.clone()),
        }
    }
    next.iteration += 1;

    let searcher_state = if moved > 0 {
        let mut refit_data = next.solved.clone();
        refit_data.extend(next.harvested.iter().cloned());
        searcher.fit(&refit_data, cfg.seed)
    } else {
        searcher_state.clone()
    };

    RefineStep {
        state: next,
        searcher_state,
        moved,
    }
}

/// Full refinement loop: fit the initial searcher on the solved pairs,
/// then iterate until the budget is spent or a sweep moves nothing.
/// `on_iteration` runs after every sweep (checkpoint hook); returning
/// `false` stops the loop early.
pub fn run_refine_with(
    state: PipelineState,
    searcher: &dyn Searcher,
    cfg: &RefineConfig,
    check: &CheckConfig,
    mut on_iteration: impl FnMut(&PipelineState, &SearcherState) -> bool,
) -> Result<(PipelineState, SearcherState), RefineError> {
    if state.solved.is_empty() {
        return Err(RefineError::EmptySeedData);
    }
    let mut theta = searcher.fit(&state.solved, cfg.seed);
    let mut state = state;
    while state.iteration < cfg.max_iterations {
        let step = refine_iteration(&state, &theta, searcher, cfg, check);
        state = step.state;
        theta = step.searcher_state;
        let go_on = on_iteration(&state, &theta);
        if step.moved == 0 || !go_on {
            break;
        }
    }
    Ok((state, theta))
}

pub fn run_refine(
    state: PipelineState,
    searcher: &dyn Searcher,
    cfg: &RefineConfig,
    check: &CheckConfig,
) -> Result<(PipelineState, SearcherState), RefineError> {
    run_refine_with(state, searcher, cfg, check, |_, _| true)
}

/// A solved pair after the conciseness pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedPair {
    pub pair: SolvedPair,
    /// The original equation was replaced by a strictly shorter one.
    pub shortened: bool,
}

impl RefinedPair {
    pub fn export_provenance(&self) -> Provenance {
        if self.shortened {
            Provenance::ConcisenessReplaced
        } else {
            self.pair.provenance
        }
    }
}

/// Re-infers every originally solved pair with the final searcher state
/// and keeps the shorter of the original equation and the best passing
/// candidate; the original wins ties. Replacements are strictly shorter
/// and still pass the answer check.
pub fn conciseness_pass(
    solved: &[SolvedPair],
    theta: &SearcherState,
    searcher: &dyn Searcher,
    cfg: &RefineConfig,
    check: &CheckConfig,
) -> Vec<RefinedPair> {
    solved
        .par_iter()
        .map(|pair| {
            let beam = searcher.beam_search(theta, &pair.masked, cfg.beam_width);
            let best = select_shortest(
                &beam,
                &pair.masked.slots,
                &pair.masked.problem.answer,
                check,
            );
            match best {
                Some(candidate) if candidate.token_length() < pair.equation.token_length() => {
                    RefinedPair {
                        pair: SolvedPair {
                            masked: pair.masked.clone(),
                            equation: candidate,
                            provenance: pair.provenance,
                        },
                        shortened: true,
                    }
                }
                _ => RefinedPair {
                    pair: pair.clone(),
                    shortened: false,
                },
            }
        })
        .collect()
}
