//! Exact evaluation of model expressions over integers and rationals.

use super::{BinOp, Expr};
use serde::Serialize;
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

/// An exact rational with `den > 0` and `gcd(num, den) == 1`. Values with
/// denominator 1 are normalized away to [`Value::Int`] and never appear
/// here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Rational {
    num: i64,
    den: i64,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rational {
    fn from_i128(mut num: i128, mut den: i128) -> Result<Value, EvalError> {
        if den == 0 {
            return Err(EvalError::DivisionByZero);
        }
        if den < 0 {
            num = -num;
            den = -den;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i128;
        num /= g;
        den /= g;
        if num > i64::MAX as i128 || num < i64::MIN as i128 || den > i64::MAX as i128 {
            return Err(EvalError::Overflow);
        }
        if den == 1 {
            Ok(Value::Int(num as i64))
        } else {
            Ok(Value::Rat(Rational {
                num: num as i64,
                den: den as i64,
            }))
        }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Result of evaluating an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Rat(Rational),
    Bool(bool),
}

impl Value {
    /// Build a rational value, normalizing to an integer when possible.
    pub fn ratio(num: i64, den: i64) -> Result<Value, EvalError> {
        Rational::from_i128(num as i128, den as i128)
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Rat(_) => "rational",
            Value::Bool(_) => "boolean",
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Rat(_))
    }

    /// Numerator/denominator view of a numeric value.
    fn parts(&self) -> Result<(i128, i128), EvalError> {
        match self {
            Value::Int(n) => Ok((*n as i128, 1)),
            Value::Rat(r) => Ok((r.num as i128, r.den as i128)),
            Value::Bool(_) => Err(EvalError::TypeMismatch {
                expected: "number",
                found: "boolean",
            }),
        }
    }

    pub fn as_bool(&self) -> Result<bool, EvalError> {
        match self {
            Value::Bool(b) => Ok(*b),
            v => Err(EvalError::TypeMismatch {
                expected: "boolean",
                found: v.type_name(),
            }),
        }
    }

    pub fn as_int(&self) -> Result<i64, EvalError> {
        match self {
            Value::Int(n) => Ok(*n),
            Value::Rat(_) => Err(EvalError::NonIntegerValue),
            Value::Bool(_) => Err(EvalError::TypeMismatch {
                expected: "integer",
                found: "boolean",
            }),
        }
    }

    pub fn to_f64(&self) -> Result<f64, EvalError> {
        let (n, d) = self.parts()?;
        Ok(n as f64 / d as f64)
    }

    fn compare(&self, other: &Value) -> Result<Ordering, EvalError> {
        let (an, ad) = self.parts()?;
        let (bn, bd) = other.parts()?;
        // cross-multiply; i128 cannot overflow from i64 components
        Ok((an * bd).cmp(&(bn * ad)))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Rat(r) => write!(f, "{r}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("division by zero")]
    DivisionByZero,
    #[error("modulo by zero")]
    ModuloByZero,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("non-integer value where an integer is required")]
    NonIntegerValue,
}

/// Name lookup used during evaluation.
pub trait EvalEnv {
    fn lookup(&self, name: &str) -> Option<Value>;
}

impl EvalEnv for () {
    fn lookup(&self, _name: &str) -> Option<Value> {
        None
    }
}

impl<F> EvalEnv for F
where
    F: Fn(&str) -> Option<Value>,
{
    fn lookup(&self, name: &str) -> Option<Value> {
        self(name)
    }
}

fn arith(op: BinOp, a: Value, b: Value) -> Result<Value, EvalError> {
    let (an, ad) = a.parts()?;
    let (bn, bd) = b.parts()?;
    let (num, den) = match op {
        BinOp::Add => (an * bd + bn * ad, ad * bd),
        BinOp::Sub => (an * bd - bn * ad, ad * bd),
        BinOp::Mul => (an * bn, ad * bd),
        BinOp::Div => {
            if bn == 0 {
                return Err(EvalError::DivisionByZero);
            }
            (an * bd, ad * bn)
        }
        _ => unreachable!("non-arithmetic operator"),
    };
    Rational::from_i128(num, den)
}

/// Evaluate an expression under the given environment.
///
/// Division is exact over rationals; a quotient with denominator 1
/// normalizes back to an integer. `&&`/`||` short-circuit left to right so
/// guards like `y != 0 & x / y > 1` are total.
pub fn eval(expr: &Expr, env: &dyn EvalEnv) -> Result<Value, EvalError> {
    match expr {
        Expr::Int(n) => Ok(Value::Int(*n)),
        Expr::Rat(r) => Ok(Value::Rat(*r)),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Ident(name) => env
            .lookup(name)
            .ok_or_else(|| EvalError::UnknownIdentifier(name.clone())),
        Expr::Neg(e) => {
            let v = eval(e, env)?;
            let (n, d) = v.parts()?;
            Rational::from_i128(-n, d)
        }
        Expr::Not(e) => Ok(Value::Bool(!eval(e, env)?.as_bool()?)),
        Expr::Binary(op, a, b) => match op {
            BinOp::And => {
                if !eval(a, env)?.as_bool()? {
                    return Ok(Value::Bool(false));
                }
                Ok(Value::Bool(eval(b, env)?.as_bool()?))
            }
            BinOp::Or => {
                if eval(a, env)?.as_bool()? {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(eval(b, env)?.as_bool()?))
            }
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let ord = eval(a, env)?.compare(&eval(b, env)?)?;
                Ok(Value::Bool(match op {
                    BinOp::Eq => ord == Ordering::Equal,
                    BinOp::Ne => ord != Ordering::Equal,
                    BinOp::Lt => ord == Ordering::Less,
                    BinOp::Le => ord != Ordering::Greater,
                    BinOp::Gt => ord == Ordering::Greater,
                    BinOp::Ge => ord != Ordering::Less,
                    _ => unreachable!(),
                }))
            }
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                arith(*op, eval(a, env)?, eval(b, env)?)
            }
        },
        Expr::Min(a, b) => {
            let (va, vb) = (eval(a, env)?, eval(b, env)?);
            Ok(if va.compare(&vb)? == Ordering::Greater {
                vb
            } else {
                va
            })
        }
        Expr::Max(a, b) => {
            let (va, vb) = (eval(a, env)?, eval(b, env)?);
            Ok(if va.compare(&vb)? == Ordering::Less {
                vb
            } else {
                va
            })
        }
        Expr::Mod(a, b) => {
            let va = eval(a, env)?.as_int()?;
            let vb = eval(b, env)?.as_int()?;
            if vb == 0 {
                return Err(EvalError::ModuloByZero);
            }
            Ok(Value::Int(va.rem_euclid(vb)))
        }
    }
}

/// Evaluate an expression that must only reference defined constants.
/// Returns `None` when the expression mentions anything else.
pub(crate) fn try_const_eval(
    expr: &Expr,
    model: &super::SymbolicModel,
) -> Option<Result<Value, EvalError>> {
    let env = |name: &str| -> Option<Value> {
        let def = model.constant(name)?;
        let value = def.value.as_ref()?;
        try_const_eval(value, model)?.ok()
    };
    // reject early if any identifier fails to resolve to a defined constant
    let mut unresolved = false;
    expr.visit(&mut |e| {
        if let Expr::Ident(name) = e {
            if model
                .constant(name)
                .and_then(|c| c.value.as_ref())
                .is_none()
            {
                unresolved = true;
            }
        }
    });
    if unresolved {
        return None;
    }
    Some(eval(expr, &env))
}
