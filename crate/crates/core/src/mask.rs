//! Number extraction and mask substitution.
//!
//! Each number `v_i` found in a problem text gets a 1-based mask index;
//! the masked text inserts `[blank][Mask_i]` right after the number's
//! surface form, and equations over the concrete numbers are rewritten
//! over mask tokens. Percentages are normalized at extraction time
//! (`20%` becomes 1/5), so a compliant equation never contains a `%`.

use crate::equation::{lex_raw, parse_raw, Equation, Expr, LexError, MaskNotation, ParseError};
use crate::equation::{BinaryOp, Constant, RawExpr, RawLeaf, RawToken};
use crate::numeric::{decimal_or_fraction, parse_decimal, rational_string};
use num::{BigRational, Zero};
use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

/// One weakly supervised datum: problem text plus its numeric answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub id: String,
    pub text: String,
    #[serde(with = "rational_string")]
    pub answer: BigRational,
    /// Present only under full supervision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_equation: Option<String>,
}

/// A number occurrence in problem text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberSlot {
    /// 1-based mask index, assigned in occurrence order.
    pub index: u32,
    #[serde(with = "rational_string")]
    pub value: BigRational,
    /// Byte range of the surface form in the original text.
    pub start: usize,
    pub end: usize,
    /// The value was written as a percentage and is already divided by 100.
    pub percent: bool,
    /// The value was written as a fraction ("1/2") and kept as one slot.
    pub fraction: bool,
}

impl NumberSlot {
    pub fn span(&self) -> Range<usize> {
        self.start..self.end
    }
}

/// A problem with its extracted number slots and masked text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedProblem {
    pub problem: ProblemRecord,
    pub slots: Vec<NumberSlot>,
    pub masked_text: String,
}

impl MaskedProblem {
    pub fn mask_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_values(&self) -> Vec<BigRational> {
        self.slots.iter().map(|s| s.value.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaskError {
    /// A numeral in the equation matches neither a problem number nor an
    /// admitted constant.
    #[error("numeral {} maps to no problem number or constant", rational_string::to_string(.0))]
    UnmappableNumber(BigRational),
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("mask {0} has no slot")]
pub struct UnboundMask(pub u32);

// Fractions only in integer/integer form; "20%" and "3.5" handled by the
// following alternatives in order.
static NUMBER_PATTERN: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(\d+/\d+)|(\d+(?:\.\d+)?%)|(\d+(?:\.\d+)?)").unwrap());

/// Scans `text` left to right and returns one slot per number, indices
/// assigned in occurrence order.
pub fn extract_numbers(text: &str) -> Vec<NumberSlot> {
    let mut slots = Vec::new();
    for caps in NUMBER_PATTERN.captures_iter(text) {
        let m = caps.get(0).unwrap();
        let surface = m.as_str();
        let (value, percent, fraction) = if let Some(frac) = caps.get(1) {
            let (n, d) = frac.as_str().split_once('/').unwrap();
            let denom = parse_decimal(d).unwrap();
            if denom.is_zero() {
                // "1/0" is not a usable fraction; fall back to the
                // numerator as a plain number.
                let numer = parse_decimal(n).unwrap();
                push_slot(&mut slots, numer, m.start(), m.start() + n.len(), false, false);
                continue;
            }
            (parse_decimal(n).unwrap() / denom, false, true)
        } else if caps.get(2).is_some() {
            let body = &surface[..surface.len() - 1];
            let v = parse_decimal(body).unwrap() / BigRational::from_integer(100.into());
            (v, true, false)
        } else {
            (parse_decimal(surface).unwrap(), false, false)
        };
        push_slot(&mut slots, value, m.start(), m.end(), percent, fraction);
    }
    slots
}

fn push_slot(
    slots: &mut Vec<NumberSlot>,
    value: BigRational,
    start: usize,
    end: usize,
    percent: bool,
    fraction: bool,
) {
    slots.push(NumberSlot {
        index: slots.len() as u32 + 1,
        value,
        start,
        end,
        percent,
        fraction,
    });
}

/// Builds the masked text: every slot's surface form is followed by
/// `[blank][Mask_i]`. Removing those insertions recovers the original
/// text byte for byte.
pub fn mask_problem(record: &ProblemRecord) -> MaskedProblem {
    let slots = extract_numbers(&record.text);
    let mut masked = String::with_capacity(record.text.len() + slots.len() * 16);
    let mut cursor = 0;
    for slot in &slots {
        masked.push_str(&record.text[cursor..slot.end]);
        masked.push_str(&format!("[blank][Mask{}]", slot.index));
        cursor = slot.end;
    }
    masked.push_str(&record.text[cursor..]);
    MaskedProblem {
        problem: record.clone(),
        slots,
        masked_text: masked,
    }
}

static MASK_INSERTION: Lazy<Regex> = Lazy::new(|| Regex::new(r"\[blank\]\[Mask\d+\]").unwrap());

/// Removes every `[blank][Mask_i]` insertion, recovering the original text.
pub fn strip_mask_insertions(masked_text: &str) -> String {
    MASK_INSERTION.replace_all(masked_text, "").into_owned()
}

/// Rewrites a concrete-number equation over mask tokens.
///
/// Each numeral equal to some slot value consumes the lowest unconsumed
/// index with that value; once all are consumed the lowest index is
/// reused, so an index may appear several times. A fraction slot also
/// matches a literal `a/b` division of two numerals. Numerals matching
/// no slot must equal an admitted constant (`1`, `100`, or the rational
/// pi literal when one is configured).
pub fn mask_equation(
    equation_text: &str,
    slots: &[NumberSlot],
    pi_literal: Option<&BigRational>,
) -> Result<Equation, MaskError> {
    let tokens: Vec<RawToken> = lex_raw(equation_text, MaskNotation::Any)?
        .into_iter()
        .map(|(tok, _)| tok)
        .collect();
    let raw = parse_raw(&tokens)?;
    let mut consumer = SlotConsumer::new(slots);
    let expr = map_expr(&raw, &mut consumer, pi_literal)?;
    Ok(Equation::new(expr))
}

struct SlotConsumer<'a> {
    slots: &'a [NumberSlot],
    consumed: Vec<bool>,
}

impl<'a> SlotConsumer<'a> {
    fn new(slots: &'a [NumberSlot]) -> Self {
        SlotConsumer {
            slots,
            consumed: vec![false; slots.len()],
        }
    }

    /// Lowest unconsumed slot with this value, else lowest matching slot
    /// (reuse), else `None`.
    fn take(&mut self, value: &BigRational, fraction_only: bool) -> Option<u32> {
        let matches = |s: &NumberSlot| &s.value == value && (!fraction_only || s.fraction);
        for (i, slot) in self.slots.iter().enumerate() {
            if !self.consumed[i] && matches(slot) {
                self.consumed[i] = true;
                return Some(slot.index);
            }
        }
        self.slots.iter().find(|s| matches(s)).map(|s| s.index)
    }
}

fn map_expr(
    raw: &RawExpr,
    consumer: &mut SlotConsumer,
    pi_literal: Option<&BigRational>,
) -> Result<Expr, MaskError> {
    // A division of two bare numerals may be the surface form of a
    // fraction slot ("1/3" in the text); match it as a single mask first.
    if let RawExpr::Binary(BinaryOp::Div, l, r) = raw {
        if let (RawExpr::Leaf(RawLeaf::Number(a)), RawExpr::Leaf(RawLeaf::Number(b))) =
            (l.as_ref(), r.as_ref())
        {
            if !b.is_zero() {
                let quotient = a / b;
                if let Some(index) = consumer.take(&quotient, true) {
                    return Ok(Expr::Mask(index));
                }
            }
        }
    }
    match raw {
        RawExpr::Leaf(RawLeaf::Mask(i)) => Ok(Expr::Mask(*i)),
        RawExpr::Leaf(RawLeaf::Pi) => Ok(Expr::Const(Constant::Pi)),
        RawExpr::Leaf(RawLeaf::Number(n)) => {
            if let Some(index) = consumer.take(n, false) {
                return Ok(Expr::Mask(index));
            }
            if n == &BigRational::from_integer(1.into()) {
                Ok(Expr::Const(Constant::One))
            } else if n == &BigRational::from_integer(100.into()) {
                Ok(Expr::Const(Constant::Hundred))
            } else if pi_literal.is_some_and(|pi| n == pi) {
                Ok(Expr::Const(Constant::Pi))
            } else {
                Err(MaskError::UnmappableNumber(n.clone()))
            }
        }
        RawExpr::Binary(op, l, r) => Ok(Expr::binary(
            *op,
            map_expr(l, consumer, pi_literal)?,
            map_expr(r, consumer, pi_literal)?,
        )),
    }
}

/// Renders `eq` with every mask replaced by its slot value's decimal
/// form (trailing zeros trimmed; non-terminating values render as a
/// parenthesized fraction).
pub fn unmask(eq: &Equation, slots: &[NumberSlot]) -> Result<String, UnboundMask> {
    if let Some(max) = eq.max_mask_index() {
        if max as usize > slots.len() {
            return Err(UnboundMask(max));
        }
    }
    Ok(crate::equation::render::render_with(eq.root(), &|i, out| {
        out.push_str(&decimal_or_fraction(&slots[(i - 1) as usize].value))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::SurfaceSyntax;

    const APPLES: &str = "Andy has 12 apples, Bob has 20 apples, and Bob gives 2 apples to Andy, how many more apples does Bob have than Andy now?";

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn int(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn record(text: &str, answer: i64) -> ProblemRecord {
        ProblemRecord {
            id: "t".into(),
            text: text.into(),
            answer: int(answer),
            reference_equation: None,
        }
    }

    #[test]
    fn extracts_numbers_in_occurrence_order() {
        let slots = extract_numbers(APPLES);
        let values: Vec<_> = slots.iter().map(|s| s.value.clone()).collect();
        assert_eq!(values, vec![int(12), int(20), int(2)]);
        assert_eq!(slots.iter().map(|s| s.index).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn no_numbers_means_no_slots() {
        assert!(extract_numbers("no numbers here").is_empty());
    }

    #[test]
    fn percent_is_normalized_at_extraction() {
        let slots = extract_numbers("a 50% discount on 30");
        assert_eq!(slots[0].value, rat(1, 2));
        assert!(slots[0].percent);
        assert_eq!(slots[1].value, int(30));
    }

    #[test]
    fn fraction_is_one_slot() {
        let slots = extract_numbers("ate 1/2 of the 6 cakes");
        assert_eq!(slots[0].value, rat(1, 2));
        assert!(slots[0].fraction);
        assert_eq!(slots.len(), 2);
    }

    #[test]
    fn masked_text_matches_expected_form() {
        let masked = mask_problem(&record(APPLES, 4));
        assert_eq!(
            masked.masked_text,
            "Andy has 12[blank][Mask1] apples, Bob has 20[blank][Mask2] apples, and Bob gives 2[blank][Mask3] apples to Andy, how many more apples does Bob have than Andy now?"
        );
    }

    #[test]
    fn masking_without_numbers_is_identity() {
        let masked = mask_problem(&record("no numbers here", 0));
        assert_eq!(masked.masked_text, "no numbers here");
        assert!(masked.slots.is_empty());
    }

    #[test]
    fn duplicate_values_get_distinct_masks_by_position() {
        let masked = mask_problem(&record("12 and 12 apples", 24));
        assert_eq!(masked.masked_text, "12[blank][Mask1] and 12[blank][Mask2] apples");
    }

    #[test]
    fn stripping_recovers_original() {
        let masked = mask_problem(&record(APPLES, 4));
        assert_eq!(strip_mask_insertions(&masked.masked_text), APPLES);
    }

    #[test]
    fn mask_equation_reuses_indices_for_repeated_numbers() {
        let slots = extract_numbers(APPLES);
        let eq = mask_equation("x = 20 - 12 - 2 - 2", &slots, None).unwrap();
        assert_eq!(eq.render(SurfaceSyntax::Bracket), "[Mask2]-[Mask1]-[Mask3]-[Mask3]");
    }

    #[test]
    fn unknown_numeral_is_unmappable() {
        let slots = extract_numbers("price 50 yuan over 3 days with 2 people");
        let err = mask_equation("x = (50000 * temp_c * temp_b) / 100", &slots, None).unwrap_err();
        assert_eq!(err, MaskError::UnmappableNumber(int(50000)));
    }

    #[test]
    fn constants_pass_through() {
        let slots = extract_numbers("just 12 things");
        let eq = mask_equation("x = 12 + 1", &slots, None).unwrap();
        assert_eq!(eq.render(SurfaceSyntax::Bracket), "[Mask1]+1");
    }

    #[test]
    fn pi_literal_maps_to_pi_constant() {
        let slots = extract_numbers("radius 5");
        let pi = rat(157, 50);
        let eq = mask_equation("x = 3.14 * 5 * 5", &slots, Some(&pi)).unwrap();
        assert_eq!(eq.render(SurfaceSyntax::Bracket), "pi*[Mask1]*[Mask1]");
    }

    #[test]
    fn slot_match_takes_priority_over_constants() {
        let slots = extract_numbers("1 bag and 3 boxes");
        let eq = mask_equation("x = 1 + 3", &slots, None).unwrap();
        assert_eq!(eq.render(SurfaceSyntax::Bracket), "[Mask1]+[Mask2]");
    }

    #[test]
    fn fraction_slot_matches_division_surface() {
        let slots = extract_numbers("ate 1/3 of 9 cakes");
        let eq = mask_equation("x = 9 * (1/3)", &slots, None).unwrap();
        assert_eq!(eq.render(SurfaceSyntax::Bracket), "[Mask2]*[Mask1]");
        // A bare fraction as the whole equation matches the same way.
        let eq = mask_equation("x = 1/3", &slots, None).unwrap();
        assert_eq!(eq.render(SurfaceSyntax::Bracket), "[Mask1]");
    }

    #[test]
    fn unmask_renders_decimal_values() {
        let slots = extract_numbers(APPLES);
        let eq = mask_equation("x = 20 - 12 - 2 - 2", &slots, None).unwrap();
        assert_eq!(unmask(&eq, &slots).unwrap(), "20-12-2-2");
    }

    #[test]
    fn unmask_single_mask() {
        let slots = extract_numbers("take 5");
        let eq = mask_equation("x = 5", &slots, None).unwrap();
        assert_eq!(unmask(&eq, &slots).unwrap(), "5");
    }

    #[test]
    fn unmask_without_slots_is_unbound() {
        let slots = extract_numbers("take 5");
        let eq = mask_equation("x = 5", &slots, None).unwrap();
        assert_eq!(unmask(&eq, &[]), Err(UnboundMask(1)));
    }
}
