//! Tokenizer for candidate equation strings.
//!
//! Two entry points: [`lex`] accepts only the public token alphabet in a
//! fixed mask notation, while the crate-internal raw lexer additionally
//! yields arbitrary numerals so concrete-number equations (before mask
//! substitution) can be parsed.

use super::{BinaryOp, Constant, SurfaceSyntax, Token};
use crate::numeric::parse_decimal;
use num::BigRational;
use once_cell::sync::Lazy;
use regex::Regex;
use std::ops::Range;
use thiserror::Error;

/// A token of the raw layer: like [`Token`] but any numeral is allowed.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawToken {
    Mask(u32),
    Number(BigRational),
    Pi,
    Op(BinaryOp),
    LParen,
    RParen,
}

/// Which mask notations the lexer recognizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum MaskNotation {
    Only(SurfaceSyntax),
    Any,
}

impl MaskNotation {
    fn bracket(self) -> bool {
        matches!(self, MaskNotation::Any | MaskNotation::Only(SurfaceSyntax::Bracket))
    }
    fn temp(self) -> bool {
        matches!(self, MaskNotation::Any | MaskNotation::Only(SurfaceSyntax::Temp))
    }
    fn index(self) -> bool {
        matches!(self, MaskNotation::Any | MaskNotation::Only(SurfaceSyntax::Index))
    }
}

/// Lexing failure pointing at the first unrecognizable character span.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unrecognized input `{snippet}` at bytes {}..{}", span.start, span.end)]
pub struct LexError {
    pub span: Range<usize>,
    pub snippet: String,
}

impl LexError {
    fn at(text: &str, start: usize, len: usize) -> LexError {
        let end = (start + len).min(text.len());
        LexError {
            span: start..end,
            snippet: text[start..end].to_string(),
        }
    }
}

static PREFIX: Lazy<Regex> = Lazy::new(|| Regex::new(r"^\s*[xX]\s*=").unwrap());
static BRACKET_MASK: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\[\s*[Mm][Aa][Ss][Kk]\s*_?\s*(\d+)\s*\]").unwrap());
static TEMP_MASK: Lazy<Regex> = Lazy::new(|| Regex::new(r"^[Tt][Ee][Mm][Pp]_([A-Za-z]+)").unwrap());
static INDEX_MASK: Lazy<Regex> = Lazy::new(|| Regex::new(r"^[Nn](\d+)").unwrap());
static NUMBER: Lazy<Regex> = Lazy::new(|| Regex::new(r"^\d+(?:\.\d+)?").unwrap());
static PI: Lazy<Regex> = Lazy::new(|| Regex::new(r"^(?:π|[Pp][Ii])").unwrap());

/// Strips one leading `x =` / `x=` prefix, if present.
fn strip_equation_prefix(text: &str) -> &str {
    match PREFIX.find(text) {
        Some(m) => &text[m.end()..],
        None => text,
    }
}

fn letters_to_index(s: &str) -> Option<u32> {
    let mut value: u32 = 0;
    for c in s.chars() {
        let d = (c.to_ascii_lowercase() as u32).checked_sub('a' as u32)? + 1;
        value = value.checked_mul(26)?.checked_add(d)?;
    }
    (value >= 1).then_some(value)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// One recognized raw token or an unrecognizable stretch, with its span.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ScanItem {
    Tok(RawToken, Range<usize>),
    /// Mask written with an index outside `1..`; never produced by [`lex`].
    BadMask(u32, Range<usize>),
    Junk(Range<usize>),
}

/// Error-tolerant scan over the whole string: recognizable tokens are
/// collected, everything else becomes junk spans. Used by the format
/// error classifier; also strips a single `x =` prefix so the prefix
/// itself never counts as junk.
pub(crate) fn scan_tolerant(text: &str) -> Vec<ScanItem> {
    let stripped = strip_equation_prefix(text);
    let base = text.len() - stripped.len();
    let mut items = Vec::new();
    let mut pos = 0;
    let mut junk_start: Option<usize> = None;
    while pos < stripped.len() {
        let rest = &stripped[pos..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            flush_junk(&mut items, &mut junk_start, base, pos);
            pos += c.len_utf8();
            continue;
        }
        match match_token(rest, MaskNotation::Any) {
            Some((tok, len)) => {
                flush_junk(&mut items, &mut junk_start, base, pos);
                let span = base + pos..base + pos + len;
                match tok {
                    Matched::Tok(t) => items.push(ScanItem::Tok(t, span)),
                    Matched::BadMask(i) => items.push(ScanItem::BadMask(i, span)),
                }
                pos += len;
            }
            None => {
                junk_start.get_or_insert(pos);
                pos += c.len_utf8();
            }
        }
    }
    flush_junk(&mut items, &mut junk_start, base, stripped.len());
    items
}

fn flush_junk(items: &mut Vec<ScanItem>, junk_start: &mut Option<usize>, base: usize, end: usize) {
    if let Some(start) = junk_start.take() {
        items.push(ScanItem::Junk(base + start..base + end));
    }
}

enum Matched {
    Tok(RawToken),
    BadMask(u32),
}

/// Attempts to match one token at the start of `rest`; returns the token
/// and its byte length.
fn match_token(rest: &str, notation: MaskNotation) -> Option<(Matched, usize)> {
    let c = rest.chars().next()?;
    match c {
        '(' => return Some((Matched::Tok(RawToken::LParen), 1)),
        ')' => return Some((Matched::Tok(RawToken::RParen), 1)),
        '+' => return Some((Matched::Tok(RawToken::Op(BinaryOp::Add)), 1)),
        '-' | '−' | '–' => return Some((Matched::Tok(RawToken::Op(BinaryOp::Sub)), c.len_utf8())),
        '*' => {
            // "**" is accepted as exponentiation.
            let len = if rest.starts_with("**") { 2 } else { 1 };
            let op = if len == 2 { BinaryOp::Pow } else { BinaryOp::Mul };
            return Some((Matched::Tok(RawToken::Op(op)), len));
        }
        '×' | '·' => return Some((Matched::Tok(RawToken::Op(BinaryOp::Mul)), c.len_utf8())),
        '/' | '÷' => return Some((Matched::Tok(RawToken::Op(BinaryOp::Div)), c.len_utf8())),
        '^' => return Some((Matched::Tok(RawToken::Op(BinaryOp::Pow)), 1)),
        _ => {}
    }
    if notation.bracket() {
        if let Some(caps) = BRACKET_MASK.captures(rest) {
            let index: u32 = caps[1].parse().ok()?;
            let len = caps.get(0).unwrap().end();
            return Some(if index >= 1 {
                (Matched::Tok(RawToken::Mask(index)), len)
            } else {
                (Matched::BadMask(index), len)
            });
        }
    }
    if notation.temp() {
        if let Some(caps) = TEMP_MASK.captures(rest) {
            let index = letters_to_index(&caps[1])?;
            return Some((Matched::Tok(RawToken::Mask(index)), caps.get(0).unwrap().end()));
        }
    }
    if notation.index() {
        if let Some(caps) = INDEX_MASK.captures(rest) {
            let index: u32 = caps[1].parse().ok()?;
            let len = caps.get(0).unwrap().end();
            // N0 denotes mask 1: the index notation is 0-based.
            return Some((Matched::Tok(RawToken::Mask(index + 1)), len));
        }
    }
    if let Some(m) = PI.find(rest) {
        let boundary_ok = rest[m.end()..].chars().next().map_or(true, |n| !is_word_char(n));
        if boundary_ok {
            return Some((Matched::Tok(RawToken::Pi), m.end()));
        }
    }
    if let Some(m) = NUMBER.find(rest) {
        let value = parse_decimal(m.as_str())?;
        return Some((Matched::Tok(RawToken::Number(value)), m.end()));
    }
    None
}

/// Raw lex: masks (in the requested notation), numerals, pi, operators
/// and parentheses, each with its byte span in `text`. Fails at the
/// first unrecognizable character.
pub(crate) fn lex_raw(
    text: &str,
    notation: MaskNotation,
) -> Result<Vec<(RawToken, Range<usize>)>, LexError> {
    let stripped = strip_equation_prefix(text);
    let base = text.len() - stripped.len();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < stripped.len() {
        let rest = &stripped[pos..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        match match_token(rest, notation) {
            Some((Matched::Tok(tok), len)) => {
                tokens.push((tok, base + pos..base + pos + len));
                pos += len;
            }
            Some((Matched::BadMask(_), len)) => {
                return Err(LexError::at(text, base + pos, len));
            }
            None => return Err(LexError::at(text, base + pos, c.len_utf8())),
        }
    }
    Ok(tokens)
}

/// Lexes a candidate string into the public token alphabet.
///
/// Strips a single leading `x =` prefix and ignores whitespace. Numerals
/// other than the constants `1` and `100` are not part of the alphabet
/// and are reported as a [`LexError`]; so are masks written in a
/// notation other than `style`.
pub fn lex(text: &str, style: SurfaceSyntax) -> Result<Vec<Token>, LexError> {
    let raw = lex_raw(text, MaskNotation::Only(style))?;
    let mut tokens = Vec::with_capacity(raw.len());
    for (tok, span) in raw {
        let mapped = match tok {
            RawToken::Mask(i) => Token::Mask(i),
            RawToken::Pi => Token::Const(Constant::Pi),
            RawToken::Op(op) => Token::Op(op),
            RawToken::LParen => Token::LParen,
            RawToken::RParen => Token::RParen,
            RawToken::Number(n) => {
                if n == BigRational::from_integer(1.into()) {
                    Token::Const(Constant::One)
                } else if n == BigRational::from_integer(100.into()) {
                    Token::Const(Constant::Hundred)
                } else {
                    return Err(LexError {
                        snippet: text[span.clone()].to_string(),
                        span,
                    });
                }
            }
        };
        tokens.push(mapped);
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn masks(tokens: &[Token]) -> Vec<u32> {
        tokens
            .iter()
            .filter_map(|t| match t {
                Token::Mask(i) => Some(*i),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn lexes_bracket_mask_equation_with_prefix() {
        let tokens = lex("x = [Mask2] - [Mask1] - [Mask3] - [Mask3]", SurfaceSyntax::Bracket).unwrap();
        assert_eq!(
            tokens,
            vec![
                Token::Mask(2),
                Token::Op(BinaryOp::Sub),
                Token::Mask(1),
                Token::Op(BinaryOp::Sub),
                Token::Mask(3),
                Token::Op(BinaryOp::Sub),
                Token::Mask(3),
            ]
        );
    }

    #[test]
    fn lexes_single_constant() {
        assert_eq!(lex("1", SurfaceSyntax::Bracket).unwrap(), vec![Token::Const(Constant::One)]);
        assert_eq!(
            lex("100", SurfaceSyntax::Temp).unwrap(),
            vec![Token::Const(Constant::Hundred)]
        );
    }

    #[test]
    fn temp_letters_map_by_alphabetic_position() {
        let tokens = lex("temp_a * temp_c", SurfaceSyntax::Temp).unwrap();
        assert_eq!(masks(&tokens), vec![1, 3]);
        assert_eq!(tokens[1], Token::Op(BinaryOp::Mul));
    }

    #[test]
    fn index_notation_is_zero_based() {
        let tokens = lex("N0 + N2", SurfaceSyntax::Index).unwrap();
        assert_eq!(masks(&tokens), vec![1, 3]);
    }

    #[test]
    fn out_of_alphabet_numeral_is_a_lex_error() {
        let err = lex("x = 50000 * temp_c", SurfaceSyntax::Temp).unwrap_err();
        assert_eq!(err.snippet, "50000");
    }

    #[test]
    fn wrong_notation_is_a_lex_error() {
        assert!(lex("[Mask1]", SurfaceSyntax::Temp).is_err());
        assert!(lex("temp_a", SurfaceSyntax::Index).is_err());
    }

    #[test]
    fn unicode_operators_normalize() {
        let tokens = lex("[Mask1] − [Mask2] × [Mask1] ÷ [Mask2]", SurfaceSyntax::Bracket).unwrap();
        let ops: Vec<_> = tokens
            .iter()
            .filter_map(|t| match t {
                Token::Op(op) => Some(*op),
                _ => None,
            })
            .collect();
        assert_eq!(ops, vec![BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div]);
    }

    #[test]
    fn double_star_is_pow() {
        let tokens = lex("[Mask1] ** [Mask2]", SurfaceSyntax::Bracket).unwrap();
        assert_eq!(tokens[1], Token::Op(BinaryOp::Pow));
    }

    #[test]
    fn pi_variants() {
        for text in ["pi", "PI", "π", "Pi"] {
            assert_eq!(
                lex(text, SurfaceSyntax::Bracket).unwrap(),
                vec![Token::Const(Constant::Pi)],
                "{text}"
            );
        }
    }

    #[test]
    fn percent_sign_is_a_lex_error() {
        let err = lex("temp_a * temp_b%", SurfaceSyntax::Temp).unwrap_err();
        assert_eq!(err.snippet, "%");
    }

    #[test]
    fn mask_index_zero_is_rejected() {
        assert!(lex("[Mask0]", SurfaceSyntax::Bracket).is_err());
    }

    #[test]
    fn tolerant_scan_splits_tokens_and_junk() {
        let items = scan_tolerant("The answer is (temp_a * 100) yuan");
        let junk: Vec<_> = items
            .iter()
            .filter(|i| matches!(i, ScanItem::Junk(_)))
            .collect();
        assert_eq!(junk.len(), 4); // "The", "answer", "is", "yuan"
        let toks = items
            .iter()
            .filter(|i| matches!(i, ScanItem::Tok(..)))
            .count();
        assert_eq!(toks, 5); // ( temp_a * 100 )
    }

    #[test]
    fn tolerant_scan_strips_prefix() {
        let items = scan_tolerant("x = temp_a");
        assert_eq!(items.len(), 1);
        assert!(matches!(items[0], ScanItem::Tok(RawToken::Mask(1), _)));
    }
}
