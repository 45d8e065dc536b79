//! Explicit-state semantics for a resolved model.
//!
//! All functions are pure over an immutable model; a state is the vector of
//! variable values in declaration order. Successor distributions are
//! computed in exact rational arithmetic, merged by target state, checked
//! against the stochasticity tolerance and then renormalized exactly before
//! conversion to `f64`.

use crate::prism::{eval, EvalEnv, EvalError, Expr, SymbolicModel, Value};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Tolerance for branch probability sums before exact renormalization.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

/// Factored explicit state: one integer per declared variable, in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateVector(pub Vec<i64>);

impl StateVector {
    pub fn values(&self) -> &[i64] {
        &self.0
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// A probability distribution over successor states. Probabilities are in
/// `(0, 1]`, targets are pairwise distinct, and the support is ordered by
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub support: Vec<(StateVector, f64)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticsError {
    #[error("evaluation failed in {context}: {source}")]
    Eval { context: String, source: EvalError },
    #[error("state has {found} values but the model declares {expected} variables")]
    ArityMismatch { expected: usize, found: usize },
    #[error("value {value} of variable '{var}' lies outside [{lower}..{upper}]")]
    StateOutOfBounds {
        var: String,
        value: i64,
        lower: i64,
        upper: i64,
    },
    #[error(
        "two commands labeled [{action}] are enabled in state {state}; \
         within-action nondeterminism is not supported"
    )]
    NondeterministicAction { action: String, state: String },
    #[error("action '{action}' is not enabled in state {state}")]
    ActionNotEnabled { action: String, state: String },
    #[error("update of [{action}] sets '{var}' to {value}, outside [{lower}..{upper}]")]
    UpdateOutOfBounds {
        action: String,
        var: String,
        value: i64,
        lower: i64,
        upper: i64,
    },
    #[error("update of [{action}] assigns non-integer value {value} to '{var}'")]
    NonIntegerUpdate {
        action: String,
        var: String,
        value: String,
    },
    #[error("branch probability of [{action}] evaluates to negative value {prob}")]
    NegativeProbability { action: String, prob: String },
    #[error("branch probabilities of [{action}] in state {state} sum to {sum}")]
    ProbabilitySum {
        action: String,
        state: String,
        sum: f64,
    },
}

struct StateEnv<'a> {
    model: &'a SymbolicModel,
    state: &'a StateVector,
}

impl EvalEnv for StateEnv<'_> {
    fn lookup(&self, name: &str) -> Option<Value> {
        let idx = self.model.variable_index(name)?;
        Some(Value::Int(self.state.0[idx]))
    }
}

fn eval_at(
    model: &SymbolicModel,
    state: &StateVector,
    expr: &Expr,
    context: &str,
) -> Result<Value, SemanticsError> {
    eval(expr, &StateEnv { model, state }).map_err(|source| SemanticsError::Eval {
        context: context.to_string(),
        source,
    })
}

fn variable_bounds(model: &SymbolicModel, idx: usize) -> Result<(i64, i64), SemanticsError> {
    let v = &model.variables[idx];
    let as_int = |e: &Expr, what: &str| {
        eval(e, &())
            .and_then(|val| val.as_int())
            .map_err(|source| SemanticsError::Eval {
                context: format!("{what} bound of '{}'", v.name),
                source,
            })
    };
    Ok((as_int(&v.lower, "lower")?, as_int(&v.upper, "upper")?))
}

fn check_state(model: &SymbolicModel, s: &StateVector) -> Result<(), SemanticsError> {
    if s.0.len() != model.variables.len() {
        return Err(SemanticsError::ArityMismatch {
            expected: model.variables.len(),
            found: s.0.len(),
        });
    }
    for (idx, decl) in model.variables.iter().enumerate() {
        let (lower, upper) = variable_bounds(model, idx)?;
        let value = s.0[idx];
        if value < lower || value > upper {
            return Err(SemanticsError::StateOutOfBounds {
                var: decl.name.clone(),
                value,
                lower,
                upper,
            });
        }
    }
    Ok(())
}

/// The state given by every variable's declared initial value.
pub fn initial_state(model: &SymbolicModel) -> Result<StateVector, SemanticsError> {
    let mut values = Vec::with_capacity(model.variables.len());
    for v in &model.variables {
        let value = eval(&v.init, &())
            .and_then(|val| val.as_int())
            .map_err(|source| SemanticsError::Eval {
                context: format!("initial value of '{}'", v.name),
                source,
            })?;
        values.push(value);
    }
    Ok(StateVector(values))
}

/// All distinct action labels, in first-appearance order over the command
/// list. This is the action universe the policy may choose from.
pub fn declared_actions(model: &SymbolicModel) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for cmd in &model.commands {
        if !out.contains(&cmd.action) {
            out.push(cmd.action.clone());
        }
    }
    out
}

/// Actions with at least one enabled command in `s`, in first-appearance
/// order. An empty result means `s` is terminal.
pub fn enabled_actions(
    model: &SymbolicModel,
    s: &StateVector,
) -> Result<Vec<String>, SemanticsError> {
    check_state(model, s)?;
    let mut out: Vec<String> = Vec::new();
    for cmd in &model.commands {
        if out.contains(&cmd.action) {
            continue;
        }
        let guard = eval_at(model, s, &cmd.guard, &format!("guard of [{}]", cmd.action))?
            .as_bool()
            .map_err(|source| SemanticsError::Eval {
                context: format!("guard of [{}]", cmd.action),
                source,
            })?;
        if guard {
            out.push(cmd.action.clone());
        }
    }
    Ok(out)
}

/// The successor distribution of taking `action` in `s`.
///
/// Exactly one command with this label may be enabled; two simultaneously
/// enabled same-labeled commands are an error, because the induced chain
/// would be left with an open choice. Assignments read the pre-state, so
/// updates are simultaneous, and branches hitting the same target state are
/// merged by summing their probabilities.
pub fn successor_distribution(
    model: &SymbolicModel,
    s: &StateVector,
    action: &str,
) -> Result<Distribution, SemanticsError> {
    check_state(model, s)?;
    let state_str = s.to_string();
    let mut chosen = None;
    for cmd in model.commands.iter().filter(|c| c.action == action) {
        let guard = eval_at(model, s, &cmd.guard, &format!("guard of [{action}]"))?
            .as_bool()
            .map_err(|source| SemanticsError::Eval {
                context: format!("guard of [{action}]"),
                source,
            })?;
        if guard {
            if chosen.is_some() {
                return Err(SemanticsError::NondeterministicAction {
                    action: action.to_string(),
                    state: state_str,
                });
            }
            chosen = Some(cmd);
        }
    }
    let Some(cmd) = chosen else {
        return Err(SemanticsError::ActionNotEnabled {
            action: action.to_string(),
            state: state_str,
        });
    };

    let mut merged: BTreeMap<StateVector, (i128, i128)> = BTreeMap::new();
    let mut sum_num: i128 = 0;
    let mut sum_den: i128 = 1;
    for branch in &cmd.branches {
        let prob = eval_at(
            model,
            s,
            &branch.prob,
            &format!("probability of [{action}]"),
        )?;
        let (num, den) = match prob {
            Value::Int(n) => (n as i128, 1i128),
            Value::Rat(r) => (r.num() as i128, r.den() as i128),
            Value::Bool(_) => {
                return Err(SemanticsError::Eval {
                    context: format!("probability of [{action}]"),
                    source: EvalError::TypeMismatch {
                        expected: "number",
                        found: "boolean",
                    },
                })
            }
        };
        if num < 0 {
            return Err(SemanticsError::NegativeProbability {
                action: action.to_string(),
                prob: format!("{num}/{den}"),
            });
        }
        // running exact sum
        sum_num = sum_num * den + num * sum_den;
        sum_den *= den;
        reduce(&mut sum_num, &mut sum_den);
        if num == 0 {
            continue;
        }

        let mut target = s.0.clone();
        for (var, rhs) in &branch.assignments {
            let idx = model
                .variable_index(var)
                .expect("parser resolves assignment targets");
            let value = eval_at(model, s, rhs, &format!("update of [{action}]"))?;
            let value = match value {
                Value::Int(n) => n,
                other => {
                    return Err(SemanticsError::NonIntegerUpdate {
                        action: action.to_string(),
                        var: var.clone(),
                        value: other.to_string(),
                    })
                }
            };
            let (lower, upper) = variable_bounds(model, idx)?;
            if value < lower || value > upper {
                return Err(SemanticsError::UpdateOutOfBounds {
                    action: action.to_string(),
                    var: var.clone(),
                    value,
                    lower,
                    upper,
                });
            }
            target[idx] = value;
        }
        let entry = merged.entry(StateVector(target)).or_insert((0, 1));
        // entry += num/den, exactly
        let (en, ed) = *entry;
        let mut nn = en * den + num * ed;
        let mut nd = ed * den;
        reduce(&mut nn, &mut nd);
        *entry = (nn, nd);
    }

    let sum = sum_num as f64 / sum_den as f64;
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        return Err(SemanticsError::ProbabilitySum {
            action: action.to_string(),
            state: state_str,
            sum,
        });
    }

    // exact renormalization: divide each mass by the exact sum
    let support = merged
        .into_iter()
        .map(|(state, (num, den))| {
            let mut n = num * sum_den;
            let mut d = den * sum_num;
            reduce(&mut n, &mut d);
            (state, n as f64 / d as f64)
        })
        .collect();
    Ok(Distribution { support })
}

fn reduce(num: &mut i128, den: &mut i128) {
    let mut a = num.unsigned_abs();
    let mut b = den.unsigned_abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    let g = a.max(1) as i128;
    *num /= g;
    *den /= g;
}

/// Names of all labels whose condition holds in `s`.
pub fn label_set(
    model: &SymbolicModel,
    s: &StateVector,
) -> Result<std::collections::BTreeSet<String>, SemanticsError> {
    check_state(model, s)?;
    let mut out = std::collections::BTreeSet::new();
    for label in &model.labels {
        let holds = eval_at(
            model,
            s,
            &label.condition,
            &format!("label \"{}\"", label.name),
        )?
        .as_bool()
        .map_err(|source| SemanticsError::Eval {
            context: format!("label \"{}\"", label.name),
            source,
        })?;
        if holds {
            out.insert(label.name.clone());
        }
    }
    Ok(out)
}

/// Canonical textual key of a state: `x=1;y=0;fuel=3` in declaration order.
/// This is the key format of scripted policy files.
pub fn canonical_state_key(model: &SymbolicModel, s: &StateVector) -> String {
    model
        .variables
        .iter()
        .zip(&s.0)
        .map(|(v, value)| format!("{}={}", v.name, value))
        .collect::<Vec<_>>()
        .join(";")
}
