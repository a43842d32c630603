//! Seeded generators for synthetic weak-supervision data: random
//! expression trees, bindings, and whole problem records with known
//! ground-truth equations. Used by property tests, benchmarks, and the
//! acceptance suite; everything is deterministic for a given seed.

use crate::equation::{evaluate, BinaryOp, Constant, Expr, PiValue, Value};
use crate::mask::ProblemRecord;
use crate::numeric::{rational_string, rational_to_f64};
use crate::Equation;
use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_op(rng: &mut ChaCha8Rng, allow_pow: bool) -> BinaryOp {
    // Exponentiation is rare in this domain; keep it rare here too.
    if allow_pow && rng.gen_ratio(1, 16) {
        return BinaryOp::Pow;
    }
    match rng.gen_range(0..4) {
        0 => BinaryOp::Add,
        1 => BinaryOp::Sub,
        2 => BinaryOp::Mul,
        _ => BinaryOp::Div,
    }
}

fn random_leaf(rng: &mut ChaCha8Rng, mask_count: u32) -> Expr {
    if mask_count > 0 && rng.gen_ratio(4, 5) {
        Expr::Mask(rng.gen_range(1..=mask_count))
    } else {
        match rng.gen_range(0..3) {
            0 => Expr::Const(Constant::One),
            1 => Expr::Const(Constant::Hundred),
            _ => Expr::Const(Constant::Pi),
        }
    }
}

/// Random tree with at most `depth` levels of operators.
pub fn random_expr(rng: &mut ChaCha8Rng, mask_count: u32, depth: u32) -> Expr {
    if depth == 0 || rng.gen_ratio(1, 3) {
        return random_leaf(rng, mask_count);
    }
    Expr::binary(
        random_op(rng, true),
        random_expr(rng, mask_count, depth - 1),
        random_expr(rng, mask_count, depth - 1),
    )
}

/// Random tree with exactly `ops` operator nodes.
pub fn random_expr_with_ops(rng: &mut ChaCha8Rng, mask_count: u32, ops: u32, allow_pow: bool) -> Expr {
    if ops == 0 {
        return random_leaf(rng, mask_count);
    }
    let left_ops = rng.gen_range(0..ops);
    let right_ops = ops - 1 - left_ops;
    Expr::binary(
        random_op(rng, allow_pow),
        random_expr_with_ops(rng, mask_count, left_ops, allow_pow),
        random_expr_with_ops(rng, mask_count, right_ops, allow_pow),
    )
}

/// Random positive rational with a terminating decimal form: an integer
/// in 2..=60, possibly with a .5 or .25 fractional part.
pub fn random_slot_value(rng: &mut ChaCha8Rng) -> BigRational {
    let whole = rng.gen_range(2i64..=60);
    let quarters = match rng.gen_range(0..10) {
        0 => 2, // x.5
        1 => 1, // x.25
        _ => 0,
    };
    BigRational::new((whole * 4 + quarters).into(), 4.into())
}

/// Random rational in a small box, for evaluation oracles.
pub fn random_rational(rng: &mut ChaCha8Rng) -> BigRational {
    let numer = rng.gen_range(-400i64..=400);
    let denom = rng.gen_range(1i64..=20);
    BigRational::new(numer.into(), denom.into())
}

/// A generated problem: the record (text and answer only, as weak
/// supervision provides) plus the ground-truth equation it was built
/// from.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub record: ProblemRecord,
    pub ground_truth: Equation,
}

/// Options for the synthetic dataset generator.
#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub min_slots: u32,
    pub max_slots: u32,
    /// Ground-truth equations carry at most this many operators.
    pub max_ops: u32,
    /// Admit `^` in ground truths.
    pub allow_pow: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            min_slots: 2,
            max_slots: 4,
            max_ops: 3,
            allow_pow: false,
        }
    }
}

const SUBJECTS: [&str; 8] = [
    "crates in the warehouse",
    "tickets sold at the counter",
    "liters in the tank",
    "pages read before lunch",
    "bricks stacked on the pallet",
    "students in the first group",
    "apples in the basket",
    "coins in the jar",
];

fn problem_text(rng: &mut ChaCha8Rng, values: &[BigRational]) -> String {
    let subject = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
    let mut text = format!("A tally starts with {} {}.", rational_string::to_string(&values[0]), subject);
    for v in &values[1..] {
        text.push_str(&format!(
            " The next measurement records {}.",
            rational_string::to_string(v)
        ));
    }
    text.push_str(" What is the final quantity?");
    text
}

/// Generates `count` problems whose answers are computed from random
/// ground-truth equations over the embedded numbers. Rejection sampling
/// keeps only equations that evaluate cleanly to a moderate answer and
/// reference at least one number of the problem.
pub fn synthetic_problems(rng: &mut ChaCha8Rng, count: usize, options: &SynthOptions) -> Vec<SyntheticProblem> {
    let mut problems = Vec::with_capacity(count);
    let pi = PiValue::default();
    while problems.len() < count {
        let k = rng.gen_range(options.min_slots..=options.max_slots);
        let values: Vec<BigRational> = (0..k).map(|_| random_slot_value(rng)).collect();
        let ops = rng.gen_range(1..=options.max_ops);
        let expr = random_expr_with_ops(rng, k, ops, options.allow_pow);
        if expr.max_mask_index().is_none() {
            continue;
        }
        let eq = Equation::new(expr);
        let answer = match evaluate(&eq, &values, &pi) {
            Ok(Value::Exact(r)) => r,
            _ => continue,
        };
        if rational_to_f64(&answer).abs() > 1e6 {
            continue;
        }
        let text = problem_text(rng, &values);
        let id = format!("synth{:05}", problems.len());
        problems.push(SyntheticProblem {
            record: ProblemRecord {
                id,
                text,
                answer,
                reference_equation: None,
            },
            ground_truth: eq,
        });
    }
    problems
}
