//! Recall reporting: by number-slot count and by pipeline stage.
//!
//! All fractions are kept exact (numerator over denominator) and only
//! rounded when printed, so the stage recalls sum to the total recall
//! without rounding residue.

use crate::distill::{DistillOutcome, Provenance};
use crate::refine::{PipelineState, RefinedPair};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// An exact fraction over the dataset size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Fraction {
        Fraction { num, den }
    }

    pub fn as_f64(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

impl std::fmt::Display for Fraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBucket {
    /// "1" through "5", or ">=6".
    pub bucket: String,
    pub solved: u64,
    pub total: u64,
}

impl VarBucket {
    pub fn recall(&self) -> Fraction {
        Fraction::new(self.solved, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub total_problems: u64,
    pub solved_problems: u64,
    pub by_variable_count: Vec<VarBucket>,
    /// Stage numerators over the dataset size; they sum to
    /// `solved_problems` exactly.
    pub equation_generation: Fraction,
    pub mask_equation_generation: Fraction,
    pub format_correction: Fraction,
    pub refine: Fraction,
    pub total_recall: Fraction,
    /// Result-check failures that landed inside the diagnostic window.
    pub near_misses: u64,
    /// Conciseness pass: how many solved equations were replaced by a
    /// strictly shorter one, when the pass ran.
    pub conciseness_shortened: Option<VarlessFraction>,
}

/// A fraction whose denominator is not the dataset size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarlessFraction {
    pub num: u64,
    pub den: u64,
}

impl VarlessFraction {
    pub fn as_f64(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

fn bucket_name(k: usize) -> Option<String> {
    match k {
        0 => None,
        1..=5 => Some(k.to_string()),
        _ => Some(">=6".into()),
    }
}

/// Builds the recall report from the final pipeline state. Stage
/// attribution comes from pair provenance; `outcomes` contributes the
/// near-miss diagnostics; `refined` (when the conciseness pass ran)
/// contributes the shortened fraction.
pub fn recall_report(
    state: &PipelineState,
    outcomes: &[DistillOutcome],
    refined: Option<&[RefinedPair]>,
) -> RecallReport {
    let total = state.total_problems() as u64;

    let mut stage_counts: BTreeMap<&'static str, u64> = BTreeMap::new();
    let mut buckets: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut solved = 0u64;

    let mut tally = |k: usize, is_solved: bool| {
        if let Some(name) = bucket_name(k) {
            let entry = buckets.entry(name).or_insert((0, 0));
            entry.1 += 1;
            if is_solved {
                entry.0 += 1;
            }
        }
    };

    for pair in state.solved.iter().chain(state.harvested.iter()) {
        solved += 1;
        tally(pair.masked.mask_count(), true);
        let key = match pair.provenance {
            Provenance::DistillStage1 => "equation_generation",
            Provenance::DistillStage2 => "mask_equation_generation",
            Provenance::DistillCorrection => "format_correction",
            Provenance::Refine | Provenance::ConcisenessReplaced => "refine",
        };
        *stage_counts.entry(key).or_insert(0) += 1;
    }
    for record in &state.unsolved {
        tally(crate::mask::extract_numbers(&record.text).len(), false);
    }

    let near_misses = outcomes.iter().map(|o| o.near_misses() as u64).sum();

    let by_variable_count = order_buckets(buckets);
    let frac = |key: &str| Fraction::new(*stage_counts.get(key).unwrap_or(&0), total);
    RecallReport {
        total_problems: total,
        solved_problems: solved,
        by_variable_count,
        equation_generation: frac("equation_generation"),
        mask_equation_generation: frac("mask_equation_generation"),
        format_correction: frac("format_correction"),
        refine: frac("refine"),
        total_recall: Fraction::new(solved, total),
        near_misses,
        conciseness_shortened: refined.map(|pairs| VarlessFraction {
            num: pairs.iter().filter(|p| p.shortened).count() as u64,
            den: pairs.len() as u64,
        }),
    }
}

fn order_buckets(buckets: BTreeMap<String, (u64, u64)>) -> Vec<VarBucket> {
    let order = ["1", "2", "3", "4", "5", ">=6"];
    order
        .iter()
        .filter_map(|name| {
            buckets.get(*name).map(|(solved, total)| VarBucket {
                bucket: name.to_string(),
                solved: *solved,
                total: *total,
            })
        })
        .collect()
}

impl RecallReport {
    /// The stage numerators must sum to the solved count; this is an
    /// arithmetic identity of the construction, re-checked here.
    pub fn stage_sum_matches_total(&self) -> bool {
        self.equation_generation.num
            + self.mask_equation_generation.num
            + self.format_correction.num
            + self.refine.num
            == self.total_recall.num
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "recall by variable count");
        let _ = writeln!(out, "  {:<6} {:>8} {:>8} {:>9}", "vars", "solved", "total", "recall");
        for bucket in &self.by_variable_count {
            let _ = writeln!(
                out,
                "  {:<6} {:>8} {:>8} {:>8.1}%",
                bucket.bucket,
                bucket.solved,
                bucket.total,
                bucket.recall().as_f64() * 100.0
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "recall by stage");
        let rows = [
            ("equation generation", self.equation_generation),
            ("mask-equation generation", self.mask_equation_generation),
            ("format correction", self.format_correction),
            ("refine", self.refine),
            ("total", self.total_recall),
        ];
        for (label, fraction) in rows {
            let _ = writeln!(
                out,
                "  {:<26} {:>9} {:>8.1}%",
                label,
                fraction.to_string(),
                fraction.as_f64() * 100.0
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "  near-miss result failures: {}", self.near_misses);
        if let Some(shortened) = &self.conciseness_shortened {
            let _ = writeln!(
                out,
                "  conciseness pass shortened: {}/{} ({:.1}%)",
                shortened.num,
                shortened.den,
                shortened.as_f64() * 100.0
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::SolvedPair;
    use crate::equation::{lex, parse};
    use crate::mask::{mask_problem, ProblemRecord};
    use crate::{Equation, SurfaceSyntax};
    use num::BigRational;

    fn record(id: &str, text: &str, answer: i64) -> ProblemRecord {
        ProblemRecord {
            id: id.into(),
            text: text.into(),
            answer: BigRational::from_integer(answer.into()),
            reference_equation: None,
        }
    }

    fn eq(text: &str) -> Equation {
        parse(&lex(text, SurfaceSyntax::Bracket).unwrap()).unwrap()
    }

    fn pair(id: &str, text: &str, provenance: Provenance) -> SolvedPair {
        SolvedPair {
            masked: mask_problem(&record(id, text, 1)),
            equation: eq("[Mask1]"),
            provenance,
        }
    }

    #[test]
    fn stage_fractions_sum_to_total() {
        let state = PipelineState {
            solved: vec![
                pair("a", "x 1 y 2", Provenance::DistillStage1),
                pair("b", "x 1 y 2", Provenance::DistillStage2),
                pair("c", "x 1 y 2", Provenance::DistillCorrection),
            ],
            unsolved: vec![record("d", "x 1 y 2", 9)],
            harvested: vec![pair("e", "x 1 y 2", Provenance::Refine)],
            iteration: 1,
        };
        let report = recall_report(&state, &[], None);
        assert_eq!(report.total_problems, 5);
        assert_eq!(report.solved_problems, 4);
        assert!(report.stage_sum_matches_total());
        assert_eq!(report.total_recall, Fraction::new(4, 5));
    }

    #[test]
    fn variable_count_buckets() {
        let state = PipelineState {
            solved: vec![
                pair("a", "x 1 y 2", Provenance::DistillStage1), // 2 vars, solved
            ],
            unsolved: vec![
                record("b", "x 1 y 2", 9),                   // 2 vars
                record("c", "1 2 3 4 5 6 and 7 more", 9),    // 7 vars
            ],
            harvested: vec![],
            iteration: 0,
        };
        let report = recall_report(&state, &[], None);
        let two = report.by_variable_count.iter().find(|b| b.bucket == "2").unwrap();
        assert_eq!((two.solved, two.total), (1, 2));
        let six = report.by_variable_count.iter().find(|b| b.bucket == ">=6").unwrap();
        assert_eq!((six.solved, six.total), (0, 1));
    }

    #[test]
    fn all_unsolved_is_all_zeros() {
        let state = PipelineState::new(vec![], vec![record("a", "x 1", 5)]);
        let report = recall_report(&state, &[], None);
        assert_eq!(report.solved_problems, 0);
        assert_eq!(report.total_recall, Fraction::new(0, 1));
        assert!(report.stage_sum_matches_total());
    }

    #[test]
    fn shortened_fraction_reported() {
        let refined = vec![
            crate::refine::RefinedPair {
                pair: pair("a", "x 1", Provenance::DistillStage1),
                shortened: true,
            },
            crate::refine::RefinedPair {
                pair: pair("b", "x 1", Provenance::DistillStage1),
                shortened: false,
            },
        ];
        let state = PipelineState {
            solved: refined.iter().map(|r| r.pair.clone()).collect(),
            unsolved: vec![],
            harvested: vec![],
            iteration: 0,
        };
        let report = recall_report(&state, &[], Some(&refined));
        let shortened = report.conciseness_shortened.unwrap();
        assert_eq!((shortened.num, shortened.den), (1, 2));
        let table = report.render_table();
        assert!(table.contains("conciseness pass shortened: 1/2"));
    }
}
