//! Precedence-climbing parser producing a single expression tree.

use super::lexer::RawToken;
use super::{BinaryOp, Constant, Equation, Token};
use num::BigRational;
use thiserror::Error;

/// Expression over the raw leaf set (masks, arbitrary numerals, pi).
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawExpr {
    Leaf(RawLeaf),
    Binary(BinaryOp, Box<RawExpr>, Box<RawExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawLeaf {
    Mask(u32),
    Number(BigRational),
    Pi,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty input")]
    Empty,
    #[error("unbalanced parenthesis at token {0}")]
    UnbalancedParen(usize),
    #[error("dangling operator at token {0}")]
    DanglingOperator(usize),
    #[error("expected an operator at token {0}")]
    MissingOperator(usize),
}

struct Cursor<'a> {
    tokens: &'a [RawToken],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a RawToken> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&'a RawToken> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }
}

/// Parses raw tokens into a single expression. Unary operators are not
/// part of the language, so a leading `-` is a dangling-operator error.
pub(crate) fn parse_raw(tokens: &[RawToken]) -> Result<RawExpr, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut cursor = Cursor { tokens, pos: 0 };
    let expr = parse_binary(&mut cursor, 0)?;
    match cursor.peek() {
        None => Ok(expr),
        Some(RawToken::RParen) => Err(ParseError::UnbalancedParen(cursor.pos)),
        Some(_) => Err(ParseError::MissingOperator(cursor.pos)),
    }
}

fn parse_binary(cursor: &mut Cursor, min_prec: u8) -> Result<RawExpr, ParseError> {
    let mut lhs = parse_primary(cursor)?;
    while let Some(RawToken::Op(op)) = cursor.peek() {
        let op = *op;
        if op.precedence() < min_prec {
            break;
        }
        cursor.bump();
        let next_min = if op.right_assoc() {
            op.precedence()
        } else {
            op.precedence() + 1
        };
        let rhs = parse_binary(cursor, next_min)?;
        lhs = RawExpr::Binary(op, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_primary(cursor: &mut Cursor) -> Result<RawExpr, ParseError> {
    let pos = cursor.pos;
    match cursor.bump() {
        Some(RawToken::Mask(i)) => Ok(RawExpr::Leaf(RawLeaf::Mask(*i))),
        Some(RawToken::Number(n)) => Ok(RawExpr::Leaf(RawLeaf::Number(n.clone()))),
        Some(RawToken::Pi) => Ok(RawExpr::Leaf(RawLeaf::Pi)),
        Some(RawToken::LParen) => {
            let inner = parse_binary(cursor, 0)?;
            match cursor.bump() {
                Some(RawToken::RParen) => Ok(inner),
                _ => Err(ParseError::UnbalancedParen(pos)),
            }
        }
        Some(RawToken::Op(_)) => Err(ParseError::DanglingOperator(pos)),
        Some(RawToken::RParen) => Err(ParseError::UnbalancedParen(pos)),
        None => Err(ParseError::DanglingOperator(pos.saturating_sub(1))),
    }
}

fn to_raw(token: &Token) -> RawToken {
    match token {
        Token::Mask(i) => RawToken::Mask(*i),
        Token::Op(op) => RawToken::Op(*op),
        Token::Const(Constant::One) => RawToken::Number(BigRational::from_integer(1.into())),
        Token::Const(Constant::Hundred) => RawToken::Number(BigRational::from_integer(100.into())),
        Token::Const(Constant::Pi) => RawToken::Pi,
        Token::LParen => RawToken::LParen,
        Token::RParen => RawToken::RParen,
    }
}

/// Parses a public token sequence into an [`Equation`].
pub fn parse(tokens: &[Token]) -> Result<Equation, ParseError> {
    let raw: Vec<RawToken> = tokens.iter().map(to_raw).collect();
    let expr = parse_raw(&raw)?;
    // The token alphabet only contains admitted constants, so the
    // conversion cannot encounter a non-constant numeral.
    Ok(Equation::from_raw(&expr, None).expect("token alphabet is constant-closed"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::{lex, SurfaceSyntax};

    fn parse_str(text: &str) -> Result<Equation, ParseError> {
        let tokens = lex(text, SurfaceSyntax::Bracket).expect("lex");
        parse(&tokens)
    }

    #[test]
    fn adjacent_operands_without_operator_fail() {
        assert_eq!(
            parse(&[Token::Mask(1), Token::Mask(2)]),
            Err(ParseError::MissingOperator(1))
        );
    }

    #[test]
    fn multiplication_binds_tighter_than_addition() {
        let eq = parse_str("[Mask1] + [Mask2] * [Mask3]").unwrap();
        use crate::equation::Expr;
        match eq.root() {
            Expr::Binary(BinaryOp::Add, l, r) => {
                assert_eq!(**l, Expr::Mask(1));
                assert!(matches!(**r, Expr::Binary(BinaryOp::Mul, _, _)));
            }
            other => panic!("unexpected tree {other:?}"),
        }
    }

    #[test]
    fn parentheses_override_precedence() {
        let eq = parse_str("([Mask1] + [Mask2]) * [Mask3]").unwrap();
        use crate::equation::Expr;
        match eq.root() {
            Expr::Binary(BinaryOp::Mul, l, r) => {
                assert!(matches!(**l, Expr::Binary(BinaryOp::Add, _, _)));
                assert_eq!(**r, Expr::Mask(3));
            }
            other => panic!("unexpected tree {other:?}"),
        }
    }

    #[test]
    fn subtraction_is_left_associative() {
        // a - b - c parses as (a - b) - c
        let eq = parse_str("[Mask1] - [Mask2] - [Mask3]").unwrap();
        use crate::equation::Expr;
        match eq.root() {
            Expr::Binary(BinaryOp::Sub, l, r) => {
                assert!(matches!(**l, Expr::Binary(BinaryOp::Sub, _, _)));
                assert_eq!(**r, Expr::Mask(3));
            }
            other => panic!("unexpected tree {other:?}"),
        }
    }

    #[test]
    fn pow_is_right_associative() {
        // a ^ b ^ c parses as a ^ (b ^ c)
        let eq = parse_str("[Mask1] ^ [Mask2] ^ [Mask3]").unwrap();
        use crate::equation::Expr;
        match eq.root() {
            Expr::Binary(BinaryOp::Pow, l, r) => {
                assert_eq!(**l, Expr::Mask(1));
                assert!(matches!(**r, Expr::Binary(BinaryOp::Pow, _, _)));
            }
            other => panic!("unexpected tree {other:?}"),
        }
    }

    #[test]
    fn unary_minus_is_rejected() {
        assert!(matches!(parse_str("- [Mask1]"), Err(ParseError::DanglingOperator(0))));
        assert!(matches!(
            parse_str("[Mask1] * (-[Mask2])"),
            Err(ParseError::DanglingOperator(_))
        ));
    }

    #[test]
    fn unbalanced_parens_are_rejected() {
        assert!(matches!(parse_str("([Mask1] + [Mask2]"), Err(ParseError::UnbalancedParen(_))));
        assert!(matches!(parse_str("[Mask1])"), Err(ParseError::UnbalancedParen(_))));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(parse(&[]), Err(ParseError::Empty));
    }

    #[test]
    fn trailing_operator_is_dangling() {
        assert!(matches!(parse_str("[Mask1] +"), Err(ParseError::DanglingOperator(_))));
    }
}
