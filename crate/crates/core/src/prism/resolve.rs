//! Constant resolution: substitute every constant reference by its value.

use super::eval::{eval, EvalError, Value};
use super::{ConstKind, Expr, SymbolicModel};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResolveError {
    #[error("constant '{0}' is undefined and no override was given")]
    MissingOverride(String),
    #[error("override for unknown constant '{0}'")]
    UnknownConstant(String),
    #[error("override for integer constant '{name}' must be an integer, got {value}")]
    TypeMismatch { name: String, value: String },
    #[error("constant '{name}' could not be evaluated: {source}")]
    Eval { name: String, source: EvalError },
    #[error("bounds of variable '{0}' could not be evaluated: {1}")]
    BadBounds(String, EvalError),
    #[error("variable '{0}' has lower bound {1} above upper bound {2}")]
    EmptyRange(String, i64, i64),
    #[error("initial value {init} of variable '{var}' lies outside [{lower}..{upper}]")]
    InitOutOfBounds {
        var: String,
        init: i64,
        lower: i64,
        upper: i64,
    },
}

fn value_to_expr(v: Value) -> Expr {
    match v {
        Value::Int(n) => Expr::Int(n),
        Value::Rat(r) => Expr::Rat(r),
        Value::Bool(b) => Expr::Bool(b),
    }
}

fn substitute(e: &Expr, consts: &BTreeMap<String, Value>) -> Expr {
    match e {
        Expr::Ident(name) => match consts.get(name) {
            Some(v) => value_to_expr(*v),
            None => e.clone(),
        },
        Expr::Int(_) | Expr::Rat(_) | Expr::Bool(_) => e.clone(),
        Expr::Neg(inner) => Expr::Neg(Box::new(substitute(inner, consts))),
        Expr::Not(inner) => Expr::Not(Box::new(substitute(inner, consts))),
        Expr::Binary(op, a, b) => Expr::Binary(
            *op,
            Box::new(substitute(a, consts)),
            Box::new(substitute(b, consts)),
        ),
        Expr::Min(a, b) => Expr::Min(
            Box::new(substitute(a, consts)),
            Box::new(substitute(b, consts)),
        ),
        Expr::Max(a, b) => Expr::Max(
            Box::new(substitute(a, consts)),
            Box::new(substitute(b, consts)),
        ),
        Expr::Mod(a, b) => Expr::Mod(
            Box::new(substitute(a, consts)),
            Box::new(substitute(b, consts)),
        ),
    }
}

/// Replace every constant reference in the model by its value. Undefined
/// constants must receive an override; overrides may also redefine defined
/// constants. The returned model contains no constant references.
pub fn resolve_constants(
    model: &SymbolicModel,
    overrides: &BTreeMap<String, Value>,
) -> Result<SymbolicModel, ResolveError> {
    for name in overrides.keys() {
        if model.constant(name).is_none() {
            return Err(ResolveError::UnknownConstant(name.clone()));
        }
    }

    // evaluate constants in declaration order; definitions may reference
    // earlier constants
    let mut values: BTreeMap<String, Value> = BTreeMap::new();
    let mut resolved_consts = Vec::with_capacity(model.constants.len());
    for c in &model.constants {
        let value = match overrides.get(&c.name) {
            Some(v) => *v,
            None => {
                let Some(def) = &c.value else {
                    return Err(ResolveError::MissingOverride(c.name.clone()));
                };
                let env = |name: &str| values.get(name).copied();
                eval(&substitute(def, &values), &env).map_err(|source| ResolveError::Eval {
                    name: c.name.clone(),
                    source,
                })?
            }
        };
        match (c.kind, value) {
            (ConstKind::Int, Value::Int(_)) => {}
            (ConstKind::Double, v) if v.is_numeric() => {}
            _ => {
                return Err(ResolveError::TypeMismatch {
                    name: c.name.clone(),
                    value: value.to_string(),
                })
            }
        }
        values.insert(c.name.clone(), value);
        resolved_consts.push(super::ConstantDef {
            name: c.name.clone(),
            kind: c.kind,
            value: Some(value_to_expr(value)),
        });
    }

    let mut out = model.clone();
    out.constants = resolved_consts;
    for v in &mut out.variables {
        v.lower = substitute(&v.lower, &values);
        v.upper = substitute(&v.upper, &values);
        v.init = substitute(&v.init, &values);
    }
    for cmd in &mut out.commands {
        cmd.guard = substitute(&cmd.guard, &values);
        for b in &mut cmd.branches {
            b.prob = substitute(&b.prob, &values);
            for (_, rhs) in &mut b.assignments {
                *rhs = substitute(rhs, &values);
            }
        }
    }
    for l in &mut out.labels {
        l.condition = substitute(&l.condition, &values);
    }

    // bounds and inits must now evaluate to integers
    for v in &out.variables {
        let as_int = |e: &Expr| -> Result<i64, ResolveError> {
            eval(e, &())
                .and_then(|val| val.as_int())
                .map_err(|err| ResolveError::BadBounds(v.name.clone(), err))
        };
        let (lower, upper, init) = (as_int(&v.lower)?, as_int(&v.upper)?, as_int(&v.init)?);
        if lower > upper {
            return Err(ResolveError::EmptyRange(v.name.clone(), lower, upper));
        }
        if init < lower || init > upper {
            return Err(ResolveError::InitOutOfBounds {
                var: v.name.clone(),
                init,
                lower,
                upper,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::parse_model;
    use super::*;

    #[test]
    fn overrides_replace_references() {
        let m = parse_model(
            "mdp const int N; module m x:[0..N] init 0; [a] x<N -> (x'=x+1); endmodule",
        )
        .unwrap();
        let overrides = BTreeMap::from([("N".to_string(), Value::Int(4))]);
        let r = resolve_constants(&m, &overrides).unwrap();
        assert_eq!(r.variables[0].upper, Expr::Int(4));
        assert_eq!(
            r.commands[0].guard,
            Expr::Binary(
                super::super::BinOp::Lt,
                Box::new(Expr::Ident("x".into())),
                Box::new(Expr::Int(4))
            )
        );
    }

    #[test]
    fn unknown_override_is_rejected() {
        let m = parse_model("mdp module m x:[0..3] init 0; endmodule").unwrap();
        let overrides = BTreeMap::from([("N".to_string(), Value::Int(4))]);
        assert!(matches!(
            resolve_constants(&m, &overrides),
            Err(ResolveError::UnknownConstant(_))
        ));
    }

    #[test]
    fn fully_defined_model_resolves_to_itself() {
        let m = parse_model(
            "mdp const int N = 3; module m x:[0..N] init 0; [a] x<N -> (x'=x+1); endmodule",
        )
        .unwrap();
        let r = resolve_constants(&m, &BTreeMap::new()).unwrap();
        assert_eq!(r.variables[0].upper, Expr::Int(3));
        // resolving twice is the identity
        assert_eq!(r, resolve_constants(&r, &BTreeMap::new()).unwrap());
    }

    #[test]
    fn missing_override_is_reported() {
        let m = parse_model("mdp const int N; module m x:[0..N] init 0; endmodule").unwrap();
        assert!(matches!(
            resolve_constants(&m, &BTreeMap::new()),
            Err(ResolveError::MissingOverride(_))
        ));
    }

    #[test]
    fn integer_constants_reject_rational_overrides() {
        let m = parse_model("mdp const int N; module m x:[0..9] init 0; endmodule").unwrap();
        let overrides = BTreeMap::from([(
            "N".to_string(),
            super::super::eval::Value::ratio(1, 2).unwrap(),
        )]);
        assert!(matches!(
            resolve_constants(&m, &overrides),
            Err(ResolveError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn post_override_init_bounds_are_checked() {
        let m = parse_model("mdp const int N; module m x:[0..N] init 2; endmodule").unwrap();
        let overrides = BTreeMap::from([("N".to_string(), Value::Int(1))]);
        assert!(matches!(
            resolve_constants(&m, &overrides),
            Err(ResolveError::InitOutOfBounds { .. })
        ));
    }
}
