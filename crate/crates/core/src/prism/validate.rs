//! Static diagnostics over a parsed model.
//!
//! Validation never fails: it returns an ordered, deterministic list of
//! diagnostics. An empty list means the model passed every check that is
//! statically decidable (branch probability sums over constant expressions,
//! bound checks for constant assignments, type checks, constant division by
//! zero).

use super::eval::{try_const_eval, Value};
use super::{BinOp, Command, Expr, SymbolicModel};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Human-readable location, e.g. `command 3 [up]` or `label "water"`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Num,
    Bool,
}

/// Infer the type of an expression, treating every identifier as numeric
/// (variables are bounded integers; constants are integers or rationals).
fn type_of(e: &Expr, diags: &mut Vec<Diagnostic>, location: &str) -> Ty {
    let expect = |e: &Expr, want: Ty, diags: &mut Vec<Diagnostic>, ctx: &str| {
        let got = type_of(e, diags, location);
        if got != want {
            diags.push(Diagnostic {
                location: location.to_string(),
                message: format!(
                    "type error: {ctx} must be {}, found {}",
                    describe(want),
                    describe(got)
                ),
            });
        }
    };
    match e {
        Expr::Int(_) | Expr::Rat(_) | Expr::Ident(_) => Ty::Num,
        Expr::Bool(_) => Ty::Bool,
        Expr::Neg(inner) => {
            expect(inner, Ty::Num, diags, "operand of unary '-'");
            Ty::Num
        }
        Expr::Not(inner) => {
            expect(inner, Ty::Bool, diags, "operand of '!'");
            Ty::Bool
        }
        Expr::Binary(op, a, b) => match op {
            BinOp::And | BinOp::Or => {
                expect(a, Ty::Bool, diags, "operand of '&'/'|'");
                expect(b, Ty::Bool, diags, "operand of '&'/'|'");
                Ty::Bool
            }
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                expect(a, Ty::Num, diags, "comparison operand");
                expect(b, Ty::Num, diags, "comparison operand");
                Ty::Bool
            }
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                expect(a, Ty::Num, diags, "arithmetic operand");
                expect(b, Ty::Num, diags, "arithmetic operand");
                Ty::Num
            }
        },
        Expr::Min(a, b) | Expr::Max(a, b) | Expr::Mod(a, b) => {
            expect(a, Ty::Num, diags, "function argument");
            expect(b, Ty::Num, diags, "function argument");
            Ty::Num
        }
    }
}

fn describe(t: Ty) -> &'static str {
    match t {
        Ty::Num => "numeric",
        Ty::Bool => "boolean",
    }
}

fn check_static_div_by_zero(
    e: &Expr,
    model: &SymbolicModel,
    diags: &mut Vec<Diagnostic>,
    location: &str,
) {
    e.visit(&mut |node| {
        let denom = match node {
            Expr::Binary(BinOp::Div, _, b) => Some(b.as_ref()),
            Expr::Mod(_, b) => Some(b.as_ref()),
            _ => None,
        };
        if let Some(d) = denom {
            if let Some(Ok(v)) = try_const_eval(d, model) {
                if v == Value::Int(0) {
                    diags.push(Diagnostic {
                        location: location.to_string(),
                        message: "division or modulo by constant zero".to_string(),
                    });
                }
            }
        }
    });
}

fn command_location(i: usize, cmd: &Command) -> String {
    format!("command {} [{}]", i + 1, cmd.action)
}

fn reduced(num: i128, den: i128) -> (i128, i128) {
    let (mut a, mut b) = (num.unsigned_abs(), den.unsigned_abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    let g = a.max(1) as i128;
    (num / g, den / g)
}

/// Run all static checks and collect diagnostics.
pub fn validate_model(model: &SymbolicModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    for (i, cmd) in model.commands.iter().enumerate() {
        let loc = command_location(i, cmd);

        // types
        let guard_ty = type_of(&cmd.guard, &mut diags, &loc);
        if guard_ty != Ty::Bool {
            diags.push(Diagnostic {
                location: loc.clone(),
                message: "guard must be boolean".to_string(),
            });
        }
        check_static_div_by_zero(&cmd.guard, model, &mut diags, &loc);

        // guard that is a constant false makes the command dead; its
        // updates can never fire, so skip the static bound checks below
        let guard_statically_false = matches!(
            try_const_eval(&cmd.guard, model),
            Some(Ok(Value::Bool(false)))
        );

        // exact rational running sum over constant-only probabilities
        let mut sum: Option<(i128, i128)> = Some((0, 1));
        for branch in &cmd.branches {
            if type_of(&branch.prob, &mut diags, &loc) != Ty::Num {
                diags.push(Diagnostic {
                    location: loc.clone(),
                    message: "branch probability must be numeric".to_string(),
                });
            }
            check_static_div_by_zero(&branch.prob, model, &mut diags, &loc);
            match try_const_eval(&branch.prob, model) {
                Some(Ok(v)) if v.is_numeric() => {
                    let p = v.to_f64().unwrap_or(f64::NAN);
                    if !(0.0..=1.0 + PROBABILITY_SUM_TOLERANCE).contains(&p) {
                        diags.push(Diagnostic {
                            location: loc.clone(),
                            message: format!("branch probability {p} is outside [0, 1]"),
                        });
                    }
                    let (num, den) = match v {
                        Value::Int(n) => (n as i128, 1),
                        Value::Rat(r) => (r.num() as i128, r.den() as i128),
                        Value::Bool(_) => unreachable!("numeric checked above"),
                    };
                    sum = sum.map(|(sn, sd)| reduced(sn * den + num * sd, sd * den));
                }
                // probabilities depending on state are checked at expansion
                _ => sum = None,
            }

            for (var, rhs) in &branch.assignments {
                if type_of(rhs, &mut diags, &loc) != Ty::Num {
                    diags.push(Diagnostic {
                        location: loc.clone(),
                        message: format!("assignment to '{var}' must be numeric"),
                    });
                }
                check_static_div_by_zero(rhs, model, &mut diags, &loc);
                if guard_statically_false {
                    continue;
                }
                let Some(decl) = model.variables.iter().find(|v| v.name == *var) else {
                    continue; // unreachable: parser resolved targets
                };
                let value = try_const_eval(rhs, model);
                let lower = try_const_eval(&decl.lower, model);
                let upper = try_const_eval(&decl.upper, model);
                if let (Some(Ok(value)), Some(Ok(Value::Int(lo))), Some(Ok(Value::Int(hi)))) =
                    (value, lower, upper)
                {
                    match value {
                        Value::Int(n) if n < lo || n > hi => diags.push(Diagnostic {
                            location: loc.clone(),
                            message: format!(
                                "assignment sets '{var}' to {n}, outside [{lo}..{hi}]"
                            ),
                        }),
                        Value::Rat(r) => diags.push(Diagnostic {
                            location: loc.clone(),
                            message: format!("assignment sets '{var}' to non-integer value {r}"),
                        }),
                        _ => {}
                    }
                }
            }
        }

        if let Some((num, den)) = sum {
            let sum = num as f64 / den as f64;
            if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                diags.push(Diagnostic {
                    location: loc.clone(),
                    message: format!("branch probabilities sum to {sum}"),
                });
            }
        }
    }

    for label in &model.labels {
        let loc = format!("label \"{}\"", label.name);
        if type_of(&label.condition, &mut diags, &loc) != Ty::Bool {
            diags.push(Diagnostic {
                location: loc.clone(),
                message: "label condition must be boolean".to_string(),
            });
        }
        check_static_div_by_zero(&label.condition, model, &mut diags, &loc);
    }

    diags
}

#[cfg(test)]
mod tests {
    use super::super::parse_model;
    use super::*;

    fn validate(src: &str) -> Vec<Diagnostic> {
        validate_model(&parse_model(src).unwrap())
    }

    #[test]
    fn exact_sums_pass() {
        let d = validate(
            "mdp module m x:[0..2] init 0;\n\
             [a] true -> 0.33:(x'=0) + 0.33:(x'=1) + 0.34:(x'=2);\nendmodule",
        );
        assert!(d.is_empty(), "{d:?}");
    }

    #[test]
    fn bad_sum_is_reported_with_its_value() {
        let d = validate(
            "mdp module m x:[0..2] init 0;\n\
             [a] true -> 0.33:(x'=0) + 0.6667:(x'=1);\nendmodule",
        );
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("0.9967"), "{}", d[0].message);
    }

    #[test]
    fn constant_out_of_bounds_assignment() {
        let d = validate("mdp module m x:[0..3] init 0; [a] true -> (x'=5); endmodule");
        assert!(
            d.iter().any(|d| d.message.contains("outside [0..3]")),
            "{d:?}"
        );
    }

    #[test]
    fn dead_commands_skip_bound_checks() {
        let d = validate("mdp module m x:[0..3] init 0; [a] false -> (x'=5); endmodule");
        assert!(d.is_empty(), "{d:?}");
    }

    #[test]
    fn type_errors_are_reported() {
        let d = validate("mdp module m x:[0..3] init 0; [a] x+1 -> (x'=0); endmodule");
        assert!(!d.is_empty());
        let d = validate("mdp module m x:[0..3] init 0; endmodule label \"l\" = x+1;");
        assert!(d.iter().any(|d| d.message.contains("boolean")), "{d:?}");
    }

    #[test]
    fn constant_division_by_zero_is_flagged() {
        let d = validate("mdp module m x:[0..3] init 0; [a] x/0 > 1 -> (x'=0); endmodule");
        assert!(d.iter().any(|d| d.message.contains("zero")), "{d:?}");
    }

    #[test]
    fn validation_is_deterministic() {
        let src = "mdp module m x:[0..2] init 0;\n\
                   [a] true -> 0.5:(x'=0) + 0.6:(x'=5);\nendmodule";
        let model = parse_model(src).unwrap();
        assert_eq!(validate_model(&model), validate_model(&model));
    }
}
