//! PCTL state formulas and their evaluation on an induced chain.
//!
//! Supported state formulas: `true`, quoted atomic propositions, `!`, `&`,
//! `|` and probability operators `P=?`, `P<p`, `P<=p`, `P>p`, `P>=p` over
//! the path formulas `X φ`, `φ U ψ`, `φ U<=k ψ`, `F φ`, `F<=k φ`, `G φ`.
//! Reward queries are rejected at parse time.

mod checker;
mod parser;

pub use checker::{check, qualitative_sets, CheckError, SolveMethod, SolverOptions};
pub use parser::{parse_property, PropertyParseError};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Relation {
    pub fn holds(&self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Lt => value < threshold,
            Relation::Le => value <= threshold,
            Relation::Gt => value > threshold,
            Relation::Ge => value >= threshold,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        }
    }
}

/// Threshold bound of a probability operator. Absent for `P=?` queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbBound {
    pub relation: Relation,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateFormula {
    True,
    Ap(String),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
    Prob {
        bound: Option<ProbBound>,
        path: PathFormula,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathFormula {
    Next(Box<StateFormula>),
    /// `φ U ψ`; `F ψ` parses as `true U ψ`.
    Until(Box<StateFormula>, Box<StateFormula>),
    /// `φ U<=k ψ`; `F<=k ψ` parses as `true U<=k ψ`.
    BoundedUntil(Box<StateFormula>, Box<StateFormula>, u64),
    /// `G φ`, evaluated as `1 - P(F !φ)`.
    Globally(Box<StateFormula>),
}

/// How a probability was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMethod {
    /// Every state was classified by the qualitative graph analysis alone.
    GraphOnly,
    ValueIteration,
    DirectSolve,
    BoundedIteration,
}

/// Result of checking one property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    /// Probability (or truth value) at the initial state.
    pub value: f64,
    /// Verdict; present iff the formula carries a threshold bound.
    pub satisfied: Option<bool>,
    /// True when the value lies within 1e-8 of the threshold, flagging a
    /// numerically fragile verdict.
    pub boundary: bool,
    pub iterations: u64,
    pub residual: f64,
    pub method: CheckMethod,
}

impl std::fmt::Display for StateFormula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StateFormula::True => write!(f, "true"),
            StateFormula::Ap(name) => write!(f, "\"{name}\""),
            StateFormula::Not(inner) => write!(f, "!{inner}"),
            StateFormula::And(a, b) => write!(f, "({a} & {b})"),
            StateFormula::Or(a, b) => write!(f, "({a} | {b})"),
            StateFormula::Prob { bound, path } => match bound {
                Some(b) => write!(f, "P{}{} [ {path} ]", b.relation.symbol(), b.threshold),
                None => write!(f, "P=? [ {path} ]"),
            },
        }
    }
}

impl std::fmt::Display for PathFormula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathFormula::Next(inner) => write!(f, "X {inner}"),
            PathFormula::Until(a, b) => match a.as_ref() {
                StateFormula::True => write!(f, "F {b}"),
                _ => write!(f, "{a} U {b}"),
            },
            PathFormula::BoundedUntil(a, b, k) => match a.as_ref() {
                StateFormula::True => write!(f, "F<={k} {b}"),
                _ => write!(f, "{a} U<={k} {b}"),
            },
            PathFormula::Globally(inner) => write!(f, "G {inner}"),
        }
    }
}
