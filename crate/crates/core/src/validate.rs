//! Format check, result check, and the format-error classifier.
//!
//! A candidate passes the format check when it parses into a single
//! expression whose every token is an in-range mask, an operator, an
//! admitted constant, or a parenthesis. Only then does the result check
//! run: the equation's value must match the answer within the strict
//! absolute tolerance. Failed format checks are classified into one of
//! five error categories that drive the correction dialogue.

use crate::equation::{
    evaluate, lex_raw, parse_raw, scan_tolerant, Equation, MaskNotation, PiValue, RawToken,
    ScanItem, Value,
};
use crate::mask::{mask_equation, MaskError, NumberSlot};
use crate::numeric::rational_to_f64;
use num::{BigRational, Signed};
use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

/// The five correctable format-error categories, in classification
/// priority order. Classification returns the first matching category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatErrorKind {
    ImproperPercent,
    LatexNotation,
    MultipleExpressions,
    ExtraneousText,
    NonCompliantNumber,
}

impl FormatErrorKind {
    pub const ALL: [FormatErrorKind; 5] = [
        FormatErrorKind::ImproperPercent,
        FormatErrorKind::LatexNotation,
        FormatErrorKind::MultipleExpressions,
        FormatErrorKind::ExtraneousText,
        FormatErrorKind::NonCompliantNumber,
    ];
}

/// A classified format failure; for extraneous text the longest
/// parseable sub-expression is recovered so correction prompts can
/// quote it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: FormatErrorKind,
    pub recovered: Option<String>,
}

/// Outcome of checking one candidate. The result fields are populated
/// only when the format check passed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub format_ok: bool,
    pub error: Option<FormatErrorKind>,
    pub result_ok: Option<bool>,
    pub value: Option<f64>,
}

impl CheckReport {
    fn format_failure(error: Option<FormatErrorKind>) -> CheckReport {
        CheckReport {
            format_ok: false,
            error,
            result_ok: None,
            value: None,
        }
    }
}

/// Tolerances and the pi binding used by the checks.
#[derive(Debug, Clone)]
pub struct CheckConfig {
    /// Strict absolute tolerance of the answer check.
    pub tolerance: BigRational,
    /// Upper edge of the near-miss diagnostic window.
    pub near_miss_ceiling: BigRational,
    pub pi: PiValue,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            tolerance: BigRational::new(1.into(), 10_000.into()),
            near_miss_ceiling: BigRational::new(1.into(), 100.into()),
            pi: PiValue::default(),
        }
    }
}

impl CheckConfig {
    pub fn pi_literal(&self) -> Option<&BigRational> {
        self.pi.literal()
    }
}

/// Format check against the token alphabet: every token must be a mask
/// with index in `1..=mask_count`, an operator, `1`, `100`, `pi`, or a
/// parenthesis, and the whole candidate must parse as one expression.
pub fn format_check(candidate: &str, mask_count: usize) -> CheckReport {
    format_check_with(candidate, mask_count, &CheckConfig::default())
}

pub fn format_check_with(candidate: &str, mask_count: usize, cfg: &CheckConfig) -> CheckReport {
    match parse_mask_candidate(candidate, mask_count, cfg) {
        Ok(_) => CheckReport {
            format_ok: true,
            error: None,
            result_ok: None,
            value: None,
        },
        Err(_) => {
            CheckReport::format_failure(classify_error_with(candidate, mask_count, cfg).map(|c| c.kind))
        }
    }
}

/// Parses a candidate written over mask tokens (any notation) into an
/// equation, enforcing alphabet membership and the mask index bound.
fn parse_mask_candidate(
    candidate: &str,
    mask_count: usize,
    cfg: &CheckConfig,
) -> Result<Equation, ()> {
    let tokens: Vec<RawToken> = lex_raw(candidate, MaskNotation::Any)
        .map_err(|_| ())?
        .into_iter()
        .map(|(tok, _)| tok)
        .collect();
    let raw = parse_raw(&tokens).map_err(|_| ())?;
    let eq = Equation::from_raw(&raw, cfg.pi_literal()).map_err(|_| ())?;
    validate_mask_range(&eq, mask_count)?;
    Ok(eq)
}

fn validate_mask_range(eq: &Equation, mask_count: usize) -> Result<(), ()> {
    match eq.max_mask_index() {
        Some(max) if max as usize > mask_count => Err(()),
        _ => Ok(()),
    }
}

static PERCENT_AFTER_VALUE: Lazy<Regex> = Lazy::new(|| Regex::new(r"[\]A-Za-z0-9_]\s*%").unwrap());
static BACKSLASH_COMMAND: Lazy<Regex> = Lazy::new(|| Regex::new(r"\\[A-Za-z]+").unwrap());
static SLASH_COMMAND: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"[\\/](?:frac|dfrac|tfrac|cdot|text|times|div|sqrt|left|right|begin|end)\b").unwrap()
});

/// Classifies a failed candidate into the first matching category;
/// `None` means none of the five patterns apply and the caller should
/// fall back to a generic reformat instruction.
pub fn classify_error(candidate: &str, mask_count: usize) -> Option<Classification> {
    classify_error_with(candidate, mask_count, &CheckConfig::default())
}

pub fn classify_error_with(
    candidate: &str,
    mask_count: usize,
    cfg: &CheckConfig,
) -> Option<Classification> {
    if PERCENT_AFTER_VALUE.is_match(candidate) {
        return Some(Classification {
            kind: FormatErrorKind::ImproperPercent,
            recovered: None,
        });
    }
    if BACKSLASH_COMMAND.is_match(candidate) || SLASH_COMMAND.is_match(candidate) {
        return Some(Classification {
            kind: FormatErrorKind::LatexNotation,
            recovered: None,
        });
    }
    if candidate.matches('=').count() > 1 {
        return Some(Classification {
            kind: FormatErrorKind::MultipleExpressions,
            recovered: None,
        });
    }
    let items = scan_tolerant(candidate);
    let has_junk = items.iter().any(|i| matches!(i, ScanItem::Junk(_)));
    if has_junk {
        if let Some(span) = longest_parseable_window(&items) {
            return Some(Classification {
                kind: FormatErrorKind::ExtraneousText,
                recovered: Some(candidate[span].to_string()),
            });
        }
    }
    let non_compliant = items.iter().any(|item| match item {
        ScanItem::BadMask(..) => true,
        ScanItem::Tok(RawToken::Mask(i), _) => *i as usize > mask_count,
        ScanItem::Tok(RawToken::Number(n), _) => !is_admitted_constant(n, cfg),
        _ => false,
    });
    if non_compliant {
        return Some(Classification {
            kind: FormatErrorKind::NonCompliantNumber,
            recovered: None,
        });
    }
    None
}

fn is_admitted_constant(n: &BigRational, cfg: &CheckConfig) -> bool {
    n == &BigRational::from_integer(1.into())
        || n == &BigRational::from_integer(100.into())
        || cfg.pi_literal().is_some_and(|pi| n == pi)
}

/// Longest contiguous token run (byte span) that parses as a single
/// expression.
fn longest_parseable_window(items: &[ScanItem]) -> Option<std::ops::Range<usize>> {
    let mut best: Option<(usize, std::ops::Range<usize>)> = None;
    for run in token_runs(items) {
        let n = run.len();
        for window in (1..=n).rev() {
            if best.as_ref().is_some_and(|(len, _)| *len >= window) {
                break;
            }
            for start in 0..=(n - window) {
                let slice = &run[start..start + window];
                let tokens: Vec<RawToken> = slice.iter().map(|(t, _)| t.clone()).collect();
                if parse_raw(&tokens).is_ok() {
                    let span = slice[0].1.start..slice[window - 1].1.end;
                    best = Some((window, span));
                    break;
                }
            }
        }
    }
    best.map(|(_, span)| span)
}

fn token_runs(items: &[ScanItem]) -> Vec<Vec<(RawToken, std::ops::Range<usize>)>> {
    let mut runs = Vec::new();
    let mut current = Vec::new();
    for item in items {
        match item {
            ScanItem::Tok(tok, span) => current.push((tok.clone(), span.clone())),
            _ => {
                if !current.is_empty() {
                    runs.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

/// Answer check: true iff the equation evaluates and the absolute
/// difference to `answer` is strictly below the tolerance. Evaluation
/// errors (division by zero, unbound masks, non-real powers) yield
/// `false`, never an exception.
pub fn result_check(eq: &Equation, slots: &[NumberSlot], answer: &BigRational) -> bool {
    result_check_with(eq, slots, answer, &CheckConfig::default())
}

pub fn result_check_with(
    eq: &Equation,
    slots: &[NumberSlot],
    answer: &BigRational,
    cfg: &CheckConfig,
) -> bool {
    let bindings: Vec<BigRational> = slots.iter().map(|s| s.value.clone()).collect();
    match evaluate(eq, &bindings, &cfg.pi) {
        Ok(Value::Exact(h)) => (h - answer).abs() < cfg.tolerance,
        Ok(Value::Approx(h)) => (h - rational_to_f64(answer)).abs() < rational_to_f64(&cfg.tolerance),
        Err(_) => false,
    }
}

/// Full candidate check as run by the distillation loop: convert the
/// candidate to mask form (concrete numerals are matched against the
/// slots first), enforce the token alphabet, then check the result.
#[derive(Debug, Clone)]
pub struct CandidateCheck {
    pub report: CheckReport,
    pub equation: Option<Equation>,
    pub classification: Option<Classification>,
}

impl CandidateCheck {
    pub fn accepted(&self) -> bool {
        self.report.format_ok && self.report.result_ok == Some(true)
    }

    /// Absolute difference fell in the near-miss diagnostic window
    /// `[tolerance, near_miss_ceiling)`.
    pub fn near_miss(&self, answer: &BigRational, cfg: &CheckConfig) -> bool {
        if self.report.result_ok != Some(false) {
            return false;
        }
        let Some(value) = self.report.value else {
            return false;
        };
        let diff = (value - rational_to_f64(answer)).abs();
        diff >= rational_to_f64(&cfg.tolerance) && diff < rational_to_f64(&cfg.near_miss_ceiling)
    }
}

pub fn check_candidate(
    candidate: &str,
    slots: &[NumberSlot],
    answer: &BigRational,
    cfg: &CheckConfig,
) -> CandidateCheck {
    let mask_count = slots.len();
    let eq = match mask_equation(candidate, slots, cfg.pi_literal()) {
        Ok(eq) => eq,
        Err(MaskError::UnmappableNumber(_)) => {
            // A numeral outside both the problem and the constant set.
            return CandidateCheck {
                report: CheckReport::format_failure(Some(FormatErrorKind::NonCompliantNumber)),
                equation: None,
                classification: Some(Classification {
                    kind: FormatErrorKind::NonCompliantNumber,
                    recovered: None,
                }),
            };
        }
        Err(_) => {
            let classification = classify_error_with(candidate, mask_count, cfg);
            return CandidateCheck {
                report: CheckReport::format_failure(classification.as_ref().map(|c| c.kind)),
                equation: None,
                classification,
            };
        }
    };
    if validate_mask_range(&eq, mask_count).is_err() {
        let classification = Some(Classification {
            kind: FormatErrorKind::NonCompliantNumber,
            recovered: None,
        });
        return CandidateCheck {
            report: CheckReport::format_failure(Some(FormatErrorKind::NonCompliantNumber)),
            equation: Some(eq),
            classification,
        };
    }
    let bindings: Vec<BigRational> = slots.iter().map(|s| s.value.clone()).collect();
    let (result_ok, value) = match evaluate(&eq, &bindings, &cfg.pi) {
        Ok(v) => {
            let ok = match &v {
                Value::Exact(h) => (h - answer).abs() < cfg.tolerance,
                Value::Approx(h) => {
                    (h - rational_to_f64(answer)).abs() < rational_to_f64(&cfg.tolerance)
                }
            };
            (ok, Some(v.to_f64()))
        }
        Err(_) => (false, None),
    };
    CandidateCheck {
        report: CheckReport {
            format_ok: true,
            error: None,
            result_ok: Some(result_ok),
            value,
        },
        equation: Some(eq),
        classification: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::{lex, parse, SurfaceSyntax};
    use crate::mask::extract_numbers;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn int(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn eq(text: &str) -> Equation {
        parse(&lex(text, SurfaceSyntax::Bracket).unwrap()).unwrap()
    }

    #[test]
    fn ground_truth_shape_passes_format_check() {
        let report = format_check("x = (temp_a * temp_c * temp_b)", 3);
        assert!(report.format_ok);
        assert_eq!(report.error, None);
    }

    #[test]
    fn percent_after_mask_is_improper_percent() {
        let report = format_check("x= temp_a * temp_c * temp_b%", 3);
        assert!(!report.format_ok);
        assert_eq!(report.error, Some(FormatErrorKind::ImproperPercent));
    }

    #[test]
    fn out_of_range_mask_is_non_compliant() {
        let report = format_check("x = [Mask1] + [Mask4]", 3);
        assert!(!report.format_ok);
        assert_eq!(report.error, Some(FormatErrorKind::NonCompliantNumber));
    }

    #[test]
    fn latex_slash_commands_classify() {
        let c = classify_error("x = /frac((/text(temp_a) /cdot /text(temp_c) /cdot", 3).unwrap();
        assert_eq!(c.kind, FormatErrorKind::LatexNotation);
        let c = classify_error(r"x = \frac{[Mask2]}{[Mask1]}", 3).unwrap();
        assert_eq!(c.kind, FormatErrorKind::LatexNotation);
    }

    #[test]
    fn two_equals_signs_classify_as_multiple_expressions() {
        let c = classify_error("x= temp_a * y,y=temp_c* temp_b/100", 3).unwrap();
        assert_eq!(c.kind, FormatErrorKind::MultipleExpressions);
    }

    #[test]
    fn words_around_expression_classify_as_extraneous_text() {
        let c = classify_error(
            "The expression of the problem is (temp_a * temp_c * temp_b) / 100 yuan",
            3,
        )
        .unwrap();
        assert_eq!(c.kind, FormatErrorKind::ExtraneousText);
        assert_eq!(c.recovered.as_deref(), Some("(temp_a * temp_c * temp_b) / 100"));
    }

    #[test]
    fn illegal_numeral_classifies_as_non_compliant() {
        let c = classify_error("x= (50000 * temp_c * temp_b) / 100", 3).unwrap();
        assert_eq!(c.kind, FormatErrorKind::NonCompliantNumber);
    }

    #[test]
    fn pure_prose_is_unclassifiable() {
        assert_eq!(classify_error("I cannot solve this problem", 3), None);
    }

    #[test]
    fn result_check_accepts_within_tolerance() {
        let slots = extract_numbers("a 12 b 20 c 2");
        let e = eq("[Mask2] - [Mask1] - [Mask3] - [Mask3]");
        assert!(result_check(&e, &slots, &int(4)));
    }

    #[test]
    fn result_check_boundary_is_strict() {
        let slots = extract_numbers("just 4 things");
        let e = eq("[Mask1]");
        // |4 - 4.00009| = 9e-5 < 1e-4 passes
        assert!(result_check(&e, &slots, &rat(400_009, 100_000)));
        // |4 - 4.0001| = 1e-4 is not strictly below the tolerance
        assert!(!result_check(&e, &slots, &rat(40_001, 10_000)));
    }

    #[test]
    fn result_check_rejects_coarse_decimal() {
        let slots = extract_numbers("a 1 of 3");
        let e = eq("[Mask1] / [Mask2]");
        // 1/3 vs 0.333: off by ~3.3e-4
        assert!(!result_check(&e, &slots, &rat(333, 1000)));
    }

    #[test]
    fn result_check_never_raises() {
        let slots = extract_numbers("a 1 of 3");
        let div_zero = eq("[Mask1] / ([Mask2] - [Mask2])");
        assert!(!result_check(&div_zero, &slots, &int(1)));
        let unbound = eq("[Mask5]");
        assert!(!result_check(&unbound, &slots, &int(1)));
        let zero_neg_pow = eq("([Mask1] - [Mask1]) ^ (1 - [Mask2])");
        assert!(!result_check(&zero_neg_pow, &slots, &int(1)));
    }

    #[test]
    fn check_candidate_accepts_concrete_equation() {
        let slots = extract_numbers("a 12 b 20 c 2");
        let check = check_candidate("x = 20 - 12 - 2 - 2", &slots, &int(4), &CheckConfig::default());
        assert!(check.accepted());
        assert_eq!(
            check.equation.unwrap().render(SurfaceSyntax::Bracket),
            "[Mask2]-[Mask1]-[Mask3]-[Mask3]"
        );
    }

    #[test]
    fn check_candidate_reports_result_failure() {
        let slots = extract_numbers("a 12 b 20 c 2");
        let check = check_candidate("x = [Mask2] - [Mask1]", &slots, &int(4), &CheckConfig::default());
        assert!(check.report.format_ok);
        assert_eq!(check.report.result_ok, Some(false));
        assert_eq!(check.report.value, Some(8.0));
    }

    #[test]
    fn near_miss_window() {
        let slots = extract_numbers("a 1 of 3");
        let cfg = CheckConfig::default();
        let check = check_candidate("x = 1/3", &slots, &rat(333, 1000), &cfg);
        assert!(check.near_miss(&rat(333, 1000), &cfg));
    }
}
