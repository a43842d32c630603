//! The equation token language: lexing, parsing, evaluation, and rendering.
//!
//! An equation is a single arithmetic expression over mask tokens
//! (placeholders for the numbers of a problem), the constants `1`, `100`
//! and `pi`, and the binary operators `+ - * / ^`. Operators follow the
//! usual precedence (`^` above `*` `/` above `+` `-`); `^` is
//! right-associative, everything else left-associative.

mod eval;
mod lexer;
pub(crate) mod parser;
pub(crate) mod render;

pub use eval::{evaluate, EvalError, PiValue, Value};
pub use lexer::{lex, LexError};
pub use parser::{parse, ParseError};

pub(crate) use lexer::{lex_raw, scan_tolerant, MaskNotation, RawToken, ScanItem};
pub(crate) use parser::{parse_raw, RawExpr, RawLeaf};

use num::BigRational;
use serde::{Deserialize, Serialize};

/// Binary operators admitted by the equation language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 5] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
    ];

    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 3,
        }
    }

    pub(crate) fn right_assoc(self) -> bool {
        matches!(self, BinaryOp::Pow)
    }

    /// Addition and multiplication commute; used for candidate deduplication.
    pub fn commutative(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Mul)
    }
}

/// The fixed constant set of the token alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constant {
    One,
    Hundred,
    Pi,
}

impl Constant {
    pub fn surface(self) -> &'static str {
        match self {
            Constant::One => "1",
            Constant::Hundred => "100",
            Constant::Pi => "pi",
        }
    }
}

/// A lexical token. Mask indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Mask(u32),
    Op(BinaryOp),
    Const(Constant),
    LParen,
    RParen,
}

/// Surface notation for mask tokens.
///
/// The same equation can be written `[Mask1]+[Mask2]`, `temp_a+temp_b`
/// or `N0+N1`; the three notations are a fixed bijection (`temp_a` and
/// `N0` both mean mask 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceSyntax {
    #[default]
    Bracket,
    Temp,
    Index,
}

impl SurfaceSyntax {
    pub fn mask_surface(self, index: u32) -> String {
        debug_assert!(index >= 1);
        match self {
            SurfaceSyntax::Bracket => format!("[Mask{index}]"),
            SurfaceSyntax::Temp => format!("temp_{}", letters(index)),
            SurfaceSyntax::Index => format!("N{}", index - 1),
        }
    }
}

impl std::str::FromStr for SurfaceSyntax {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bracket" => Ok(SurfaceSyntax::Bracket),
            "temp" => Ok(SurfaceSyntax::Temp),
            "index" => Ok(SurfaceSyntax::Index),
            other => Err(format!("unknown surface syntax `{other}`")),
        }
    }
}

/// Spreadsheet-style letter encoding: 1 -> "a", 26 -> "z", 27 -> "aa".
fn letters(mut index: u32) -> String {
    let mut out = Vec::new();
    while index > 0 {
        index -= 1;
        out.push(b'a' + (index % 26) as u8);
        index /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Expression tree with operators at internal nodes and masks or
/// constants at the leaves.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Mask(u32),
    Const(Constant),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    /// Number of mask, operator and constant tokens (parentheses excluded).
    pub fn node_count(&self) -> usize {
        match self {
            Expr::Mask(_) | Expr::Const(_) => 1,
            Expr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    pub fn max_mask_index(&self) -> Option<u32> {
        match self {
            Expr::Mask(i) => Some(*i),
            Expr::Const(_) => None,
            Expr::Binary(_, l, r) => match (l.max_mask_index(), r.max_mask_index()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
        }
    }
}

/// A well-formed equation: a single expression tree.
///
/// Rendering and re-parsing an `Equation` always recovers a
/// structurally identical tree, so the tree itself is the canonical
/// representation and token sequences are derived on demand.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Equation {
    root: Expr,
}

impl Equation {
    pub fn new(root: Expr) -> Equation {
        Equation { root }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn into_root(self) -> Expr {
        self.root
    }

    /// Count of mask/operator/constant tokens, excluding parentheses.
    pub fn token_length(&self) -> usize {
        self.root.node_count()
    }

    pub fn max_mask_index(&self) -> Option<u32> {
        self.root.max_mask_index()
    }

    /// Token sequence in the given notation, including the parentheses
    /// the minimal rendering would contain.
    pub fn tokens(&self) -> Vec<Token> {
        render::tokens(&self.root)
    }

    pub fn render(&self, style: SurfaceSyntax) -> String {
        render::render_expr(&self.root, style)
    }

    pub(crate) fn from_raw(
        raw: &parser::RawExpr,
        pi_literal: Option<&BigRational>,
    ) -> Result<Equation, NonConstantNumber> {
        Ok(Equation::new(from_raw_expr(raw, pi_literal)?))
    }
}

impl std::fmt::Display for Equation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render(SurfaceSyntax::Bracket))
    }
}

impl Serialize for Equation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.render(SurfaceSyntax::Bracket))
    }
}

impl<'de> Deserialize<'de> for Equation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let tokens = lex(&text, SurfaceSyntax::Bracket).map_err(serde::de::Error::custom)?;
        parse(&tokens).map_err(serde::de::Error::custom)
    }
}

/// A numeral that is neither a mask binding nor one of the admitted
/// constants; surfaces as a format violation further up.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NonConstantNumber(pub BigRational);

fn from_raw_expr(
    raw: &parser::RawExpr,
    pi_literal: Option<&BigRational>,
) -> Result<Expr, NonConstantNumber> {
    use parser::{RawExpr, RawLeaf};
    match raw {
        RawExpr::Leaf(RawLeaf::Mask(i)) => Ok(Expr::Mask(*i)),
        RawExpr::Leaf(RawLeaf::Pi) => Ok(Expr::Const(Constant::Pi)),
        RawExpr::Leaf(RawLeaf::Number(n)) => {
            if n == &BigRational::from_integer(1.into()) {
                Ok(Expr::Const(Constant::One))
            } else if n == &BigRational::from_integer(100.into()) {
                Ok(Expr::Const(Constant::Hundred))
            } else if pi_literal.is_some_and(|pi| n == pi) {
                Ok(Expr::Const(Constant::Pi))
            } else {
                Err(NonConstantNumber(n.clone()))
            }
        }
        RawExpr::Binary(op, l, r) => Ok(Expr::binary(
            *op,
            from_raw_expr(l, pi_literal)?,
            from_raw_expr(r, pi_literal)?,
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letter_encoding_is_bijective_base_26() {
        assert_eq!(letters(1), "a");
        assert_eq!(letters(2), "b");
        assert_eq!(letters(26), "z");
        assert_eq!(letters(27), "aa");
        assert_eq!(letters(28), "ab");
        assert_eq!(letters(52), "az");
        assert_eq!(letters(53), "ba");
    }

    #[test]
    fn mask_surfaces() {
        assert_eq!(SurfaceSyntax::Bracket.mask_surface(2), "[Mask2]");
        assert_eq!(SurfaceSyntax::Temp.mask_surface(3), "temp_c");
        assert_eq!(SurfaceSyntax::Index.mask_surface(1), "N0");
    }

    #[test]
    fn token_length_counts_nodes_not_parens() {
        let eq = Equation::new(Expr::binary(
            BinaryOp::Mul,
            Expr::binary(BinaryOp::Add, Expr::Mask(1), Expr::Mask(2)),
            Expr::Mask(3),
        ));
        assert_eq!(eq.token_length(), 5);
        assert_eq!(eq.render(SurfaceSyntax::Bracket), "([Mask1]+[Mask2])*[Mask3]");
    }
}
