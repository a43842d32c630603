//! Deterministic rendering with minimal parentheses.
//!
//! A child is parenthesized exactly when omitting the parentheses would
//! re-parse into a different tree: lower-precedence children always, and
//! equal-precedence children on the side the operator does not associate
//! to. Re-parsing a rendering therefore recovers the identical tree, not
//! merely an equivalent one.

use super::{Expr, SurfaceSyntax, Token};

fn needs_parens(parent: &Expr, child: &Expr, is_right: bool) -> bool {
    let (Expr::Binary(parent_op, _, _), Expr::Binary(child_op, _, _)) = (parent, child) else {
        return false;
    };
    let (pp, cp) = (parent_op.precedence(), child_op.precedence());
    if cp < pp {
        return true;
    }
    if cp > pp {
        return false;
    }
    // Equal precedence: association decides.
    if parent_op.right_assoc() {
        !is_right
    } else {
        is_right
    }
}

pub(crate) fn render_expr(expr: &Expr, style: SurfaceSyntax) -> String {
    let mut out = String::new();
    write_expr(expr, style, &mut out, &|i, out| out.push_str(&style.mask_surface(i)));
    out
}

/// Rendering with a custom mask leaf formatter; the formatter must emit
/// an atomic (or self-parenthesized) fragment.
pub(crate) fn render_with(expr: &Expr, mask: &dyn Fn(u32, &mut String)) -> String {
    let mut out = String::new();
    write_expr(expr, SurfaceSyntax::Bracket, &mut out, mask);
    out
}

fn write_expr(expr: &Expr, style: SurfaceSyntax, out: &mut String, mask: &dyn Fn(u32, &mut String)) {
    match expr {
        Expr::Mask(i) => mask(*i, out),
        Expr::Const(c) => out.push_str(c.surface()),
        Expr::Binary(op, l, r) => {
            write_child(expr, l, false, style, out, mask);
            out.push(op.symbol());
            write_child(expr, r, true, style, out, mask);
        }
    }
}

fn write_child(
    parent: &Expr,
    child: &Expr,
    is_right: bool,
    style: SurfaceSyntax,
    out: &mut String,
    mask: &dyn Fn(u32, &mut String),
) {
    if needs_parens(parent, child, is_right) {
        out.push('(');
        write_expr(child, style, out, mask);
        out.push(')');
    } else {
        write_expr(child, style, out, mask);
    }
}

/// Token sequence of the minimal rendering, parentheses included.
pub(crate) fn tokens(expr: &Expr) -> Vec<Token> {
    let mut out = Vec::new();
    push_tokens(expr, &mut out);
    out
}

fn push_tokens(expr: &Expr, out: &mut Vec<Token>) {
    match expr {
        Expr::Mask(i) => out.push(Token::Mask(*i)),
        Expr::Const(c) => out.push(Token::Const(*c)),
        Expr::Binary(op, l, r) => {
            push_child(expr, l, false, out);
            out.push(Token::Op(*op));
            push_child(expr, r, true, out);
        }
    }
}

fn push_child(parent: &Expr, child: &Expr, is_right: bool, out: &mut Vec<Token>) {
    if needs_parens(parent, child, is_right) {
        out.push(Token::LParen);
        push_tokens(child, out);
        out.push(Token::RParen);
    } else {
        push_tokens(child, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::{lex, parse, BinaryOp, Equation, SurfaceSyntax};

    fn eq(text: &str) -> Equation {
        parse(&lex(text, SurfaceSyntax::Bracket).unwrap()).unwrap()
    }

    #[test]
    fn subtraction_chain_renders_without_parens() {
        let e = eq("[Mask2] - [Mask1] - [Mask3] - [Mask3]");
        assert_eq!(e.render(SurfaceSyntax::Bracket), "[Mask2]-[Mask1]-[Mask3]-[Mask3]");
    }

    #[test]
    fn grouped_sum_keeps_parens_in_temp_style() {
        let e = eq("([Mask1] + [Mask2]) * [Mask3]");
        assert_eq!(e.render(SurfaceSyntax::Temp), "(temp_a+temp_b)*temp_c");
    }

    #[test]
    fn single_mask_in_index_style() {
        assert_eq!(eq("[Mask1]").render(SurfaceSyntax::Index), "N0");
    }

    #[test]
    fn right_nested_subtraction_is_parenthesized() {
        let e = Equation::new(Expr::binary(
            BinaryOp::Sub,
            Expr::Mask(1),
            Expr::binary(BinaryOp::Add, Expr::Mask(2), Expr::Mask(3)),
        ));
        assert_eq!(e.render(SurfaceSyntax::Bracket), "[Mask1]-([Mask2]+[Mask3])");
    }

    #[test]
    fn right_nested_addition_keeps_tree_shape() {
        // a+(b+c) must not collapse to a+b+c, which re-parses left-nested.
        let e = Equation::new(Expr::binary(
            BinaryOp::Add,
            Expr::Mask(1),
            Expr::binary(BinaryOp::Add, Expr::Mask(2), Expr::Mask(3)),
        ));
        let rendered = e.render(SurfaceSyntax::Bracket);
        assert_eq!(rendered, "[Mask1]+([Mask2]+[Mask3])");
        let reparsed = parse(&lex(&rendered, SurfaceSyntax::Bracket).unwrap()).unwrap();
        assert_eq!(reparsed, e);
    }

    #[test]
    fn pow_chain_renders_by_association() {
        let right = eq("[Mask1] ^ [Mask2] ^ [Mask3]");
        assert_eq!(right.render(SurfaceSyntax::Bracket), "[Mask1]^[Mask2]^[Mask3]");
        let left = Equation::new(Expr::binary(
            BinaryOp::Pow,
            Expr::binary(BinaryOp::Pow, Expr::Mask(1), Expr::Mask(2)),
            Expr::Mask(3),
        ));
        assert_eq!(left.render(SurfaceSyntax::Bracket), "([Mask1]^[Mask2])^[Mask3]");
    }

    #[test]
    fn tokens_match_rendering() {
        let e = eq("([Mask1] + 100) * pi");
        let text = e.render(SurfaceSyntax::Bracket);
        let relexed = lex(&text, SurfaceSyntax::Bracket).unwrap();
        assert_eq!(relexed, e.tokens());
    }
}
