//! Parser, printer and static checks for a PRISM-style model subset.
//!
//! The accepted subset is deliberately small: a single `mdp` model with one
//! `module ... endmodule` block, bounded integer variables (`bool` declares
//! desugar to `[0..1]`), guarded probabilistic commands that all carry an
//! action label, `label` definitions, and `rewards ... endrewards` blocks
//! that are stored verbatim but never evaluated.
//!
//! Probabilities written as decimals or integer fractions (`0.33`, `1/3`)
//! are kept as exact rationals; all other arithmetic is exact over integers
//! and rationals.

mod eval;
mod lexer;
mod parser;
mod printer;
mod resolve;
mod validate;

pub use eval::{eval, EvalEnv, EvalError, Rational, Value};
pub use parser::{parse_model, ParseError, ParseErrorKind};
pub use printer::print_model;
pub use resolve::{resolve_constants, ResolveError};
pub use validate::{validate_model, Diagnostic};

use serde::Serialize;
use std::fmt;

/// Model kinds accepted by the parser. Only `mdp` is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelKind {
    Mdp,
}

/// A parsed model: constants, one module of variables and commands, labels,
/// and inert reward blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicModel {
    pub model_kind: ModelKind,
    pub constants: Vec<ConstantDef>,
    pub module_name: String,
    pub variables: Vec<VariableDecl>,
    pub commands: Vec<Command>,
    pub labels: Vec<LabelDef>,
    pub rewards: Vec<RewardDef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstKind {
    Int,
    Double,
}

/// `const int N = 4;` — `value` is `None` for undefined constants, which
/// must then be supplied through [`resolve_constants`] overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDef {
    pub name: String,
    pub kind: ConstKind,
    pub value: Option<Expr>,
}

/// A bounded integer state variable. Bounds and the initial value may
/// reference constants until the model is resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableDecl {
    pub name: String,
    pub lower: Expr,
    pub upper: Expr,
    pub init: Expr,
}

/// `[action] guard -> p1 : (x'=e) & (y'=e) + p2 : ... ;`
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub action: String,
    pub guard: Expr,
    pub branches: Vec<Branch>,
}

/// One probabilistic branch of a command. An empty assignment list is the
/// `true` update (state unchanged).
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub prob: Expr,
    pub assignments: Vec<(String, Expr)>,
}

/// `label "name" = condition;`
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDef {
    pub name: String,
    pub condition: Expr,
}

/// A reward block, stored as raw text. Parsed for round-tripping only.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardDef {
    pub raw: String,
}

/// Expression AST over integers, exact rationals and booleans.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Rat(Rational),
    Bool(bool),
    Ident(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Mod(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl Expr {
    /// Walk the expression tree, visiting every node.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Int(_) | Expr::Rat(_) | Expr::Bool(_) | Expr::Ident(_) => {}
            Expr::Neg(e) | Expr::Not(e) => e.visit(f),
            Expr::Binary(_, a, b) | Expr::Min(a, b) | Expr::Max(a, b) | Expr::Mod(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        printer::write_expr(f, self)
    }
}

impl SymbolicModel {
    /// Index of a variable in declaration order.
    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Look up a constant definition by name.
    pub fn constant(&self, name: &str) -> Option<&ConstantDef> {
        self.constants.iter().find(|c| c.name == name)
    }

    /// The canonical text form of the model; reparsing it yields an equal
    /// model.
    pub fn to_canonical_string(&self) -> String {
        print_model(self)
    }
}
