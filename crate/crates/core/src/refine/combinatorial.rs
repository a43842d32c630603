//! Deterministic combinatorial searcher: a desk-scale stand-in for a
//! fine-tuned neural middle model.
//!
//! `fit` learns a bigram frequency prior over token symbols (all mask
//! indices collapse to one symbol) from the training pairs. `beam_search`
//! enumerates alphabet-compliant expressions bottom-up by operator
//! count, dynamic-programming over reachable values, keeps candidates
//! whose float value lands near the problem's answer, re-checks them in
//! exact arithmetic, deduplicates by algebraic normal form (commutative
//! operands sorted), and returns the top `width` by prior score. The
//! whole procedure is deterministic for a given fit and seed.

use super::{Searcher, SearcherState};
use crate::distill::SolvedPair;
use crate::equation::{BinaryOp, Constant, Expr};
use crate::mask::MaskedProblem;
use crate::numeric::rational_to_f64;
use crate::validate::{result_check_with, CheckConfig};
use crate::{Equation, SurfaceSyntax};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

const STATE_VERSION: &str = "bigram-combinatorial/1";

/// Symbol alphabet of the prior: masks collapse to one symbol.
const SYM_COUNT: usize = 9;
const SYM_MASK: usize = 0;
const SYM_ONE: usize = 1;
const SYM_HUNDRED: usize = 2;
const SYM_PI: usize = 3;
// Operators occupy 4..9 in BinaryOp::ALL order.
const BOS: usize = SYM_COUNT;
const EOS: usize = SYM_COUNT + 1;
const SYM_NAMES: [&str; SYM_COUNT + 2] =
    ["M", "1", "100", "pi", "+", "-", "*", "/", "^", "<s>", "</s>"];

fn op_symbol(op: BinaryOp) -> usize {
    4 + BinaryOp::ALL.iter().position(|o| *o == op).unwrap()
}

fn expr_symbols(expr: &Expr, out: &mut Vec<usize>) {
    match expr {
        Expr::Mask(_) => out.push(SYM_MASK),
        Expr::Const(Constant::One) => out.push(SYM_ONE),
        Expr::Const(Constant::Hundred) => out.push(SYM_HUNDRED),
        Expr::Const(Constant::Pi) => out.push(SYM_PI),
        Expr::Binary(op, l, r) => {
            expr_symbols(l, out);
            out.push(op_symbol(*op));
            expr_symbols(r, out);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BigramCounts {
    seed: u64,
    /// counts["a>b"] = occurrences of symbol b after symbol a.
    bigrams: BTreeMap<String, u64>,
    totals: BTreeMap<String, u64>,
}

/// Dense log-probability table derived from the stored counts with
/// add-one smoothing.
struct Prior {
    logp: [[f64; SYM_COUNT + 2]; SYM_COUNT + 2],
}

impl Prior {
    fn from_counts(counts: &BigramCounts) -> Prior {
        let vocab = (SYM_COUNT + 1) as f64; // any symbol or end-of-sequence
        let mut logp = [[0.0; SYM_COUNT + 2]; SYM_COUNT + 2];
        for (a, row) in logp.iter_mut().enumerate() {
            let total = *counts.totals.get(SYM_NAMES[a]).unwrap_or(&0) as f64;
            for (b, cell) in row.iter_mut().enumerate() {
                let key = format!("{}>{}", SYM_NAMES[a], SYM_NAMES[b]);
                let count = *counts.bigrams.get(&key).unwrap_or(&0) as f64;
                *cell = ((count + 1.0) / (total + vocab)).ln();
            }
        }
        Prior { logp }
    }
}

/// One enumerated expression: its float value, prior bookkeeping, and
/// the tree itself.
#[derive(Clone)]
struct Entry {
    value: f64,
    expr: Expr,
    /// Sum of transition log-probs inside the symbol sequence.
    inner_lp: f64,
    first: usize,
    last: usize,
}

impl Entry {
    fn full_score(&self, prior: &Prior) -> f64 {
        prior.logp[BOS][self.first] + self.inner_lp + prior.logp[self.last][EOS]
    }
}

/// Reference searcher over the expression space bounded by `max_ops`
/// operators.
#[derive(Debug, Clone)]
pub struct CombinatorialSearcher {
    pub max_ops: usize,
    /// Distinct values kept per operator-count level; beyond this the
    /// best-scored entries survive.
    pub level_cap: usize,
    /// Candidate hits collected before ranking.
    pub hit_cap: usize,
    check: CheckConfig,
}

impl CombinatorialSearcher {
    pub fn new(max_ops: usize) -> CombinatorialSearcher {
        CombinatorialSearcher {
            max_ops,
            level_cap: 4000,
            hit_cap: 512,
            check: CheckConfig::default(),
        }
    }

    pub fn with_check(mut self, check: CheckConfig) -> CombinatorialSearcher {
        self.check = check;
        self
    }
}

impl Searcher for CombinatorialSearcher {
    fn fit(&self, pairs: &[SolvedPair], seed: u64) -> SearcherState {
        let mut bigrams: BTreeMap<String, u64> = BTreeMap::new();
        let mut totals: BTreeMap<String, u64> = BTreeMap::new();
        for pair in pairs {
            let mut syms = vec![BOS];
            expr_symbols(pair.equation.root(), &mut syms);
            syms.push(EOS);
            for window in syms.windows(2) {
                let key = format!("{}>{}", SYM_NAMES[window[0]], SYM_NAMES[window[1]]);
                *bigrams.entry(key).or_insert(0) += 1;
                *totals.entry(SYM_NAMES[window[0]].to_string()).or_insert(0) += 1;
            }
        }
        let counts = BigramCounts { seed, bigrams, totals };
        SearcherState {
            version: STATE_VERSION.into(),
            payload: serde_json::to_value(&counts).expect("serializable counts"),
        }
    }

    fn beam_search(
        &self,
        state: &SearcherState,
        masked: &MaskedProblem,
        width: usize,
    ) -> Vec<Equation> {
        if state.version != STATE_VERSION {
            return Vec::new();
        }
        let Ok(counts) = serde_json::from_value::<BigramCounts>(state.payload.clone()) else {
            return Vec::new();
        };
        let prior = Prior::from_counts(&counts);
        let answer = rational_to_f64(&masked.problem.answer);
        if !answer.is_finite() || width == 0 {
            return Vec::new();
        }

        let pi = self
            .check
            .pi_literal()
            .map(rational_to_f64)
            .unwrap_or(std::f64::consts::PI);
        let mut leaves: Vec<Entry> = Vec::new();
        for slot in &masked.slots {
            leaves.push(Entry {
                value: rational_to_f64(&slot.value),
                expr: Expr::Mask(slot.index),
                inner_lp: 0.0,
                first: SYM_MASK,
                last: SYM_MASK,
            });
        }
        for (value, expr, sym) in [
            (1.0, Expr::Const(Constant::One), SYM_ONE),
            (100.0, Expr::Const(Constant::Hundred), SYM_HUNDRED),
            (pi, Expr::Const(Constant::Pi), SYM_PI),
        ] {
            leaves.push(Entry {
                value,
                expr,
                inner_lp: 0.0,
                first: sym,
                last: sym,
            });
        }

        // Absolute closeness window for the float pre-filter; wide enough
        // that float drift cannot hide an exactly-passing candidate, the
        // exact re-check prunes the rest.
        let window = 1e-3 + 1e-9 * answer.abs();
        let mut hits: Vec<Entry> = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        let mut push_hit = |entry: &Entry, hits: &mut Vec<Entry>, seen: &mut HashSet<String>| {
            if hits.len() >= self.hit_cap || (entry.value - answer).abs() >= window {
                return;
            }
            let key = Equation::new(normal_form(&entry.expr)).render(SurfaceSyntax::Bracket);
            if seen.insert(key) {
                hits.push(entry.clone());
            }
        };

        // levels[n]: value-keyed best entries among expressions with n
        // operators. Keying by value is lossless for reachability: a
        // combination only depends on operand values.
        let mut levels: Vec<BTreeMap<u64, Entry>> = Vec::with_capacity(self.max_ops + 1);
        let mut level0 = BTreeMap::new();
        for leaf in leaves {
            push_hit(&leaf, &mut hits, &mut seen);
            insert_entry(&mut level0, leaf, &prior);
        }
        levels.push(level0);

        for n in 1..=self.max_ops {
            let mut level: BTreeMap<u64, Entry> = BTreeMap::new();
            for i in 0..n {
                let j = n - 1 - i;
                let (left_level, right_level) = (&levels[i], &levels[j]);
                for left in left_level.values() {
                    for right in right_level.values() {
                        for op in BinaryOp::ALL {
                            let Some(value) = apply_op(op, left.value, right.value) else {
                                continue;
                            };
                            // Score bookkeeping is cheap; the tree is
                            // only built for kept combinations.
                            let inner_lp = left.inner_lp
                                + prior.logp[left.last][op_symbol(op)]
                                + prior.logp[op_symbol(op)][right.first]
                                + right.inner_lp;
                            let first = left.first;
                            let last = right.last;
                            let score = prior.logp[BOS][first] + inner_lp + prior.logp[last][EOS];
                            let key = value_key(value);
                            let improves = match level.get(&key) {
                                None => true,
                                Some(existing) => score > existing.full_score(&prior),
                            };
                            let hit_candidate =
                                hits.len() < self.hit_cap && (value - answer).abs() < window;
                            if !improves && !hit_candidate {
                                continue;
                            }
                            let entry = Entry {
                                value,
                                expr: Expr::binary(op, left.expr.clone(), right.expr.clone()),
                                inner_lp,
                                first,
                                last,
                            };
                            push_hit(&entry, &mut hits, &mut seen);
                            if improves {
                                level.insert(key, entry);
                            }
                        }
                    }
                }
            }
            if level.len() > self.level_cap {
                level = truncate_level(level, self.level_cap, &prior);
            }
            levels.push(level);
        }

        // Exact re-check: only candidates that genuinely pass the answer
        // check in rational arithmetic survive.
        let mut passing: Vec<(f64, String, Equation)> = hits
            .into_iter()
            .filter_map(|entry| {
                let eq = Equation::new(entry.expr.clone());
                result_check_with(&eq, &masked.slots, &masked.problem.answer, &self.check).then(
                    || {
                        let score = entry.full_score(&prior);
                        let render = eq.render(SurfaceSyntax::Bracket);
                        (score, render, eq)
                    },
                )
            })
            .collect();
        passing.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        passing.truncate(width);
        passing.into_iter().map(|(_, _, eq)| eq).collect()
    }
}

/// Canonical bit pattern of a float value for map keys.
fn value_key(value: f64) -> u64 {
    let normalized = if value == 0.0 { 0.0 } else { value };
    normalized.to_bits()
}

fn apply_op(op: BinaryOp, a: f64, b: f64) -> Option<f64> {
    let value = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return None;
            }
            a / b
        }
        BinaryOp::Pow => {
            if (a < 0.0 && b.fract() != 0.0) || (a == 0.0 && b < 0.0) {
                return None;
            }
            a.powf(b)
        }
    };
    value.is_finite().then_some(value)
}

/// Keeps the better entry per value: higher prior score, then the
/// lexicographically smaller rendering for determinism.
fn insert_entry(level: &mut BTreeMap<u64, Entry>, entry: Entry, prior: &Prior) {
    let key = value_key(entry.value);
    match level.get(&key) {
        None => {
            level.insert(key, entry);
        }
        Some(existing) => {
            let new_score = entry.full_score(prior);
            let old_score = existing.full_score(prior);
            let replace = new_score > old_score
                || (new_score == old_score
                    && entry.expr.node_count() < existing.expr.node_count());
            if replace {
                level.insert(key, entry);
            }
        }
    }
}

fn truncate_level(level: BTreeMap<u64, Entry>, cap: usize, prior: &Prior) -> BTreeMap<u64, Entry> {
    let mut entries: Vec<(u64, Entry)> = level.into_iter().collect();
    entries.sort_by(|a, b| {
        b.1.full_score(prior)
            .total_cmp(&a.1.full_score(prior))
            .then_with(|| a.0.cmp(&b.0))
    });
    entries.truncate(cap);
    entries.into_iter().collect()
}

/// Algebraic normal form: commutative operands sorted structurally.
fn normal_form(expr: &Expr) -> Expr {
    match expr {
        Expr::Binary(op, l, r) => {
            let left = normal_form(l);
            let right = normal_form(r);
            if op.commutative() && right < left {
                Expr::binary(*op, right, left)
            } else {
                Expr::binary(*op, left, right)
            }
        }
        leaf => leaf.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::Provenance;
    use crate::equation::{lex, parse};
    use crate::mask::{mask_problem, ProblemRecord};
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

    fn seed_pairs() -> Vec<SolvedPair> {
        vec![SolvedPair {
            masked: mask_problem(&record("seed", "x 3 y 4", 7)),
            equation: eq("[Mask1] + [Mask2]"),
            provenance: Provenance::DistillStage1,
        }]
    }

    #[test]
    fn finds_passing_candidate_within_bounds() {
        let searcher = CombinatorialSearcher::new(3);
        let theta = searcher.fit(&seed_pairs(), 7);
        let masked = mask_problem(&record("p", "a 12 b 20 c 2", 4));
        let beam = searcher.beam_search(&theta, &masked, 5);
        assert!(!beam.is_empty());
        for candidate in &beam {
            assert!(result_check_with(
                candidate,
                &masked.slots,
                &masked.problem.answer,
                &CheckConfig::default()
            ));
            assert!(candidate.max_mask_index().unwrap_or(0) <= 3);
        }
    }

    #[test]
    fn unreachable_answer_yields_empty_beam() {
        let searcher = CombinatorialSearcher::new(2);
        let theta = searcher.fit(&seed_pairs(), 7);
        // No expression over {2, 3, 1, 100, pi} with at most two
        // operators lands within 1e-4 of 123456.789.
        let masked = mask_problem(&record("p", "a 2 b 3", 123_456));
        let beam = searcher.beam_search(&theta, &masked, 5);
        assert!(beam.is_empty());
    }

    #[test]
    fn identical_fit_and_seed_yield_identical_beams() {
        let searcher = CombinatorialSearcher::new(3);
        let theta_a = searcher.fit(&seed_pairs(), 42);
        let theta_b = searcher.fit(&seed_pairs(), 42);
        assert_eq!(theta_a, theta_b);
        let masked = mask_problem(&record("p", "a 6 b 3 c 2", 9));
        assert_eq!(
            searcher.beam_search(&theta_a, &masked, 5),
            searcher.beam_search(&theta_b, &masked, 5)
        );
    }

    #[test]
    fn beams_deduplicate_commutative_variants() {
        let searcher = CombinatorialSearcher::new(1);
        let theta = searcher.fit(&seed_pairs(), 0);
        let masked = mask_problem(&record("p", "a 3 b 4", 7));
        let beam = searcher.beam_search(&theta, &masked, 5);
        // 3+4 and 4+3 share a normal form; only one survives.
        assert_eq!(beam.len(), 1);
        assert_eq!(beam[0].token_length(), 3);
    }

    #[test]
    fn respects_width() {
        let searcher = CombinatorialSearcher::new(2);
        let theta = searcher.fit(&seed_pairs(), 0);
        let masked = mask_problem(&record("p", "a 2 b 2 c 4", 4));
        let beam = searcher.beam_search(&theta, &masked, 2);
        assert!(beam.len() <= 2);
        assert!(!beam.is_empty());
    }

    #[test]
    fn wrong_state_version_is_an_empty_beam() {
        let searcher = CombinatorialSearcher::new(2);
        let state = SearcherState {
            version: "other/1".into(),
            payload: serde_json::json!({}),
        };
        let masked = mask_problem(&record("p", "a 2 b 2", 4));
        assert!(searcher.beam_search(&state, &masked, 5).is_empty());
    }
}

