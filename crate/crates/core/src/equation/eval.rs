//! Expression evaluation under number bindings.
//!
//! Arithmetic stays in exact rationals as long as both operands are
//! rational; only exponentiation with a non-integer (or very large)
//! exponent, or a non-rational pi, drops to floating point. The exact
//! path keeps long chains free of float drift so the answer-tolerance
//! comparison is meaningful at the 1e-4 boundary.

use super::{BinaryOp, Constant, Equation, Expr};
use crate::numeric::rational_to_f64;
use num::traits::Pow;
use num::{BigRational, ToPrimitive, Zero};
use thiserror::Error;

/// The value bound to the `pi` constant.
#[derive(Debug, Clone, PartialEq)]
pub enum PiValue {
    /// A rational stand-in; datasets in this domain conventionally grade
    /// circle problems with pi = 3.14.
    Exact(BigRational),
    /// Full f64 precision; forces evaluation onto the float path.
    Precise,
}

impl Default for PiValue {
    fn default() -> Self {
        PiValue::Exact(BigRational::new(157.into(), 50.into()))
    }
}

impl PiValue {
    fn to_value(&self) -> Value {
        match self {
            PiValue::Exact(r) => Value::Exact(r.clone()),
            PiValue::Precise => Value::Approx(std::f64::consts::PI),
        }
    }

    /// The rational literal that maps a bare numeral onto `pi`, if any.
    pub fn literal(&self) -> Option<&BigRational> {
        match self {
            PiValue::Exact(r) => Some(r),
            PiValue::Precise => None,
        }
    }
}

/// An evaluation result: exact while the computation stayed rational.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(BigRational),
    Approx(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => rational_to_f64(r),
            Value::Approx(f) => *f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("mask {0} has no bound value")]
    UnboundMask(u32),
    #[error("result is not a real number")]
    NonRealResult,
}

// Exponents above this are evaluated in floating point; exact powers of
// that size are never needed at the 1e-4 answer tolerance.
const MAX_EXACT_EXPONENT: i64 = 32;
const MAX_EXACT_BASE_BITS: u64 = 256;

/// Evaluates `eq` with mask `i` bound to `bindings[i-1]` and `pi` bound
/// to `pi_value`.
pub fn evaluate(
    eq: &Equation,
    bindings: &[BigRational],
    pi_value: &PiValue,
) -> Result<Value, EvalError> {
    eval_expr(eq.root(), bindings, pi_value)
}

fn eval_expr(expr: &Expr, bindings: &[BigRational], pi: &PiValue) -> Result<Value, EvalError> {
    match expr {
        Expr::Mask(i) => bindings
            .get((*i - 1) as usize)
            .map(|v| Value::Exact(v.clone()))
            .ok_or(EvalError::UnboundMask(*i)),
        Expr::Const(Constant::One) => Ok(Value::Exact(BigRational::from_integer(1.into()))),
        Expr::Const(Constant::Hundred) => Ok(Value::Exact(BigRational::from_integer(100.into()))),
        Expr::Const(Constant::Pi) => Ok(pi.to_value()),
        Expr::Binary(op, l, r) => {
            let left = eval_expr(l, bindings, pi)?;
            let right = eval_expr(r, bindings, pi)?;
            apply(*op, left, right)
        }
    }
}

fn apply(op: BinaryOp, left: Value, right: Value) -> Result<Value, EvalError> {
    match (left, right) {
        (Value::Exact(a), Value::Exact(b)) => apply_exact(op, a, b),
        (a, b) => apply_approx(op, a.to_f64(), b.to_f64()),
    }
}

fn apply_exact(op: BinaryOp, a: BigRational, b: BigRational) -> Result<Value, EvalError> {
    match op {
        BinaryOp::Add => Ok(Value::Exact(a + b)),
        BinaryOp::Sub => Ok(Value::Exact(a - b)),
        BinaryOp::Mul => Ok(Value::Exact(a * b)),
        BinaryOp::Div => {
            if b.is_zero() {
                Err(EvalError::DivisionByZero)
            } else {
                Ok(Value::Exact(a / b))
            }
        }
        BinaryOp::Pow => pow_exact(a, b),
    }
}

fn pow_exact(base: BigRational, exp: BigRational) -> Result<Value, EvalError> {
    if exp.is_integer() {
        if let Some(e) = exp.to_integer().to_i64() {
            let base_small = base.numer().bits() <= MAX_EXACT_BASE_BITS
                && base.denom().bits() <= MAX_EXACT_BASE_BITS;
            if e.unsigned_abs() <= MAX_EXACT_EXPONENT as u64 && base_small {
                if base.is_zero() && e < 0 {
                    return Err(EvalError::DivisionByZero);
                }
                return Ok(Value::Exact(Pow::pow(base, e as i32)));
            }
        }
    }
    apply_approx(BinaryOp::Pow, rational_to_f64(&base), rational_to_f64(&exp))
}

fn apply_approx(op: BinaryOp, a: f64, b: f64) -> Result<Value, EvalError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(EvalError::NonRealResult);
    }
    let value = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            a / b
        }
        BinaryOp::Pow => {
            if a == 0.0 && b < 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            if a < 0.0 && b.fract() != 0.0 {
                return Err(EvalError::NonRealResult);
            }
            a.powf(b)
        }
    };
    if value.is_finite() {
        Ok(Value::Approx(value))
    } else {
        Err(EvalError::NonRealResult)
    }
}
