//! Recursive-descent parser for the model subset.
//!
//! Accepted shape, in order:
//!
//! ```text
//! mdp
//! const int N = 4;            // constants (optionally undefined)
//! module name
//!   x : [0..N] init 0;        // bounded integer variables
//!   flag : bool init false;   // sugar for [0..1]
//!   [act] guard -> p : (x'=e) & ... + p : ... ;
//! endmodule
//! label "name" = expr;        // any number, after the module
//! rewards ... endrewards      // stored verbatim, never evaluated
//! ```
//!
//! Identifier resolution happens during the parse: every identifier in an
//! expression must name a previously declared constant or variable, so the
//! returned model is closed. A division of two integer literals is folded
//! into an exact rational, which is how `1/3` denotes a third.

use super::eval::{try_const_eval, Value};
use super::lexer::{Lexer, Spanned, Tok};
use super::{
    BinOp, Branch, Command, ConstKind, ConstantDef, Expr, LabelDef, ModelKind, RewardDef,
    SymbolicModel, VariableDecl,
};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

const MAX_EXPR_DEPTH: u32 = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected {found}, expected {}", expected.join(" or "))]
    UnexpectedToken {
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("unterminated string literal")]
    UnterminatedString,
    #[error("invalid number literal '{0}'")]
    InvalidNumber(String),
    #[error("duplicate identifier '{0}'")]
    DuplicateIdentifier(String),
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("commands must carry an action label")]
    UnlabeledCommand,
    #[error("variable '{0}' is assigned more than once in a branch")]
    DuplicateAssignment(String),
    #[error("initial value {init} of variable '{var}' lies outside [{lower}..{upper}]")]
    InitOutOfBounds {
        var: String,
        init: i64,
        lower: i64,
        upper: i64,
    },
    #[error("model kind '{0}' is not supported, only 'mdp'")]
    UnsupportedModelKind(String),
    #[error("only a single module block is supported")]
    MultipleModules,
    #[error("expression nesting too deep")]
    NestingTooDeep,
    #[error("boolean variables must be initialized with 'true' or 'false'")]
    BadBoolInit,
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    // lazily filled lookahead ring
    buf: Vec<Spanned>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            lexer: Lexer::new(src),
            buf: Vec::new(),
        }
    }

    fn fill(&mut self, n: usize) -> Result<(), ParseError> {
        while self.buf.len() <= n {
            let t = self.lexer.next_token()?;
            self.buf.push(t);
        }
        Ok(())
    }

    fn peek(&mut self) -> Result<&Spanned, ParseError> {
        self.fill(0)?;
        Ok(&self.buf[0])
    }

    fn peek_n(&mut self, n: usize) -> Result<&Spanned, ParseError> {
        self.fill(n)?;
        Ok(&self.buf[n])
    }

    fn next(&mut self) -> Result<Spanned, ParseError> {
        self.fill(0)?;
        Ok(self.buf.remove(0))
    }

    fn err_here(&mut self, kind: ParseErrorKind) -> ParseError {
        match self.peek() {
            Ok(s) => ParseError {
                line: s.line,
                col: s.col,
                kind,
            },
            Err(e) => ParseError { kind, ..e },
        }
    }

    fn unexpected(&mut self, expected: Vec<&'static str>) -> ParseError {
        let (found, line, col) = match self.peek() {
            Ok(s) => (s.tok.describe(), s.line, s.col),
            Err(e) => return e,
        };
        ParseError {
            line,
            col,
            kind: ParseErrorKind::UnexpectedToken { found, expected },
        }
    }

    fn expect(&mut self, tok: Tok, what: &'static str) -> Result<Spanned, ParseError> {
        if self.peek()?.tok == tok {
            self.next()
        } else {
            Err(self.unexpected(vec![what]))
        }
    }

    fn expect_ident(&mut self, what: &'static str) -> Result<String, ParseError> {
        match &self.peek()?.tok {
            Tok::Ident(_) => {
                let Spanned {
                    tok: Tok::Ident(s), ..
                } = self.next()?
                else {
                    unreachable!()
                };
                Ok(s)
            }
            _ => Err(self.unexpected(vec![what])),
        }
    }
}

/// Parse a model from source text.
pub fn parse_model(text: &str) -> Result<SymbolicModel, ParseError> {
    let mut p = Parser::new(text);

    // header
    match &p.peek()?.tok {
        Tok::KwMdp => {
            p.next()?;
        }
        Tok::Ident(kind) if kind == "dtmc" || kind == "ctmc" || kind == "pta" => {
            let kind = kind.clone();
            return Err(p.err_here(ParseErrorKind::UnsupportedModelKind(kind)));
        }
        _ => return Err(p.unexpected(vec!["'mdp'"])),
    }

    let mut model = SymbolicModel {
        model_kind: ModelKind::Mdp,
        constants: Vec::new(),
        module_name: String::new(),
        variables: Vec::new(),
        commands: Vec::new(),
        labels: Vec::new(),
        rewards: Vec::new(),
    };
    let mut names: HashSet<String> = HashSet::new();
    let mut label_names: HashSet<String> = HashSet::new();
    let mut seen_module = false;

    loop {
        match &p.peek()?.tok {
            Tok::KwConst => {
                if seen_module {
                    return Err(p.unexpected(vec!["'label'", "'rewards'", "end of input"]));
                }
                p.next()?;
                let c = parse_const(&mut p, &model)?;
                if !names.insert(c.name.clone()) {
                    return Err(p.err_here(ParseErrorKind::DuplicateIdentifier(c.name)));
                }
                model.constants.push(c);
            }
            Tok::KwModule => {
                if seen_module {
                    return Err(p.err_here(ParseErrorKind::MultipleModules));
                }
                seen_module = true;
                p.next()?;
                parse_module(&mut p, &mut model, &mut names)?;
            }
            Tok::KwLabel => {
                p.next()?;
                let label = parse_label(&mut p, &model)?;
                if !label_names.insert(label.name.clone()) {
                    return Err(p.err_here(ParseErrorKind::DuplicateIdentifier(label.name)));
                }
                model.labels.push(label);
            }
            Tok::KwRewards => {
                p.next()?;
                // switch to raw capture; the lookahead buffer is empty here
                debug_assert!(p.buf.is_empty());
                let raw = p.lexer.capture_until_endrewards()?;
                model.rewards.push(RewardDef { raw });
            }
            Tok::Eof => break,
            _ => {
                return Err(p.unexpected(vec![
                    "'const'",
                    "'module'",
                    "'label'",
                    "'rewards'",
                    "end of input",
                ]))
            }
        }
    }

    if !seen_module {
        return Err(ParseError {
            line: p.lexer_line(),
            col: 1,
            kind: ParseErrorKind::UnexpectedToken {
                found: "end of input".into(),
                expected: vec!["'module'"],
            },
        });
    }
    Ok(model)
}

impl<'a> Parser<'a> {
    fn lexer_line(&self) -> u32 {
        1
    }
}

fn parse_const(p: &mut Parser, model: &SymbolicModel) -> Result<ConstantDef, ParseError> {
    let kind = match &p.peek()?.tok {
        Tok::KwInt => {
            p.next()?;
            ConstKind::Int
        }
        Tok::KwDouble => {
            p.next()?;
            ConstKind::Double
        }
        _ => ConstKind::Int,
    };
    let name = p.expect_ident("constant name")?;
    let value = if p.peek()?.tok == Tok::Eq {
        p.next()?;
        Some(parse_expr(p, model, &[])?)
    } else {
        None
    };
    p.expect(Tok::Semi, "';'")?;
    Ok(ConstantDef { name, kind, value })
}

fn parse_module(
    p: &mut Parser,
    model: &mut SymbolicModel,
    names: &mut HashSet<String>,
) -> Result<(), ParseError> {
    model.module_name = p.expect_ident("module name")?;
    // variable declarations: ident ':' ...
    loop {
        let is_decl = matches!(&p.peek()?.tok, Tok::Ident(_)) && p.peek_n(1)?.tok == Tok::Colon;
        if !is_decl {
            break;
        }
        let v = parse_variable(p, model)?;
        if !names.insert(v.name.clone()) {
            return Err(p.err_here(ParseErrorKind::DuplicateIdentifier(v.name)));
        }
        model.variables.push(v);
    }
    // commands
    loop {
        match &p.peek()?.tok {
            Tok::LBracket => {
                let c = parse_command(p, model)?;
                model.commands.push(c);
            }
            Tok::KwEndModule => {
                p.next()?;
                return Ok(());
            }
            _ => return Err(p.unexpected(vec!["'['", "'endmodule'"])),
        }
    }
}

fn parse_variable(p: &mut Parser, model: &SymbolicModel) -> Result<VariableDecl, ParseError> {
    let name = p.expect_ident("variable name")?;
    p.expect(Tok::Colon, "':'")?;
    let (lower, upper, init) = match &p.peek()?.tok {
        Tok::KwBool => {
            p.next()?;
            p.expect(Tok::KwInit, "'init'")?;
            let init = match p.next()?.tok {
                Tok::KwTrue => Expr::Int(1),
                Tok::KwFalse => Expr::Int(0),
                _ => return Err(p.err_here(ParseErrorKind::BadBoolInit)),
            };
            (Expr::Int(0), Expr::Int(1), init)
        }
        Tok::LBracket => {
            p.next()?;
            let lower = parse_expr(p, model, &[])?;
            p.expect(Tok::DotDot, "'..'")?;
            let upper = parse_expr(p, model, &[])?;
            p.expect(Tok::RBracket, "']'")?;
            p.expect(Tok::KwInit, "'init'")?;
            let init = parse_expr(p, model, &[])?;
            (lower, upper, init)
        }
        _ => return Err(p.unexpected(vec!["'['", "'bool'"])),
    };
    p.expect(Tok::Semi, "';'")?;
    let decl = VariableDecl {
        name,
        lower,
        upper,
        init,
    };
    check_init_bounds(p, model, &decl)?;
    Ok(decl)
}

/// Reject a declaration whose constant-evaluable init lies outside its
/// constant-evaluable bounds. Bounds involving undefined constants are
/// re-checked during constant resolution instead.
fn check_init_bounds(
    p: &mut Parser,
    model: &SymbolicModel,
    decl: &VariableDecl,
) -> Result<(), ParseError> {
    let ints = [&decl.lower, &decl.upper, &decl.init]
        .into_iter()
        .map(|e| match try_const_eval(e, model) {
            Some(Ok(Value::Int(n))) => Some(n),
            _ => None,
        })
        .collect::<Vec<_>>();
    if let [Some(lower), Some(upper), Some(init)] = ints[..] {
        if init < lower || init > upper {
            return Err(p.err_here(ParseErrorKind::InitOutOfBounds {
                var: decl.name.clone(),
                init,
                lower,
                upper,
            }));
        }
    }
    Ok(())
}

fn parse_command(p: &mut Parser, model: &SymbolicModel) -> Result<Command, ParseError> {
    p.expect(Tok::LBracket, "'['")?;
    if p.peek()?.tok == Tok::RBracket {
        return Err(p.err_here(ParseErrorKind::UnlabeledCommand));
    }
    let action = p.expect_ident("action label")?;
    p.expect(Tok::RBracket, "']'")?;
    let vars: Vec<String> = model.variables.iter().map(|v| v.name.clone()).collect();
    let guard = parse_expr(p, model, &vars)?;
    p.expect(Tok::Arrow, "'->'")?;

    let mut branches = Vec::new();
    loop {
        branches.push(parse_branch(p, model, &vars)?);
        match p.peek()?.tok {
            Tok::Plus => {
                p.next()?;
            }
            Tok::Semi => {
                p.next()?;
                break;
            }
            _ => return Err(p.unexpected(vec!["'+'", "';'"])),
        }
    }
    Ok(Command {
        action,
        guard,
        branches,
    })
}

fn parse_branch(
    p: &mut Parser,
    model: &SymbolicModel,
    vars: &[String],
) -> Result<Branch, ParseError> {
    // A branch is either `prob : update` or a bare update with implicit
    // probability 1. An update starts with `(` ident `'` or is the literal
    // `true`, neither of which is a valid start of `prob : ...` here.
    let starts_update = match &p.peek()?.tok {
        Tok::LParen => matches!(&p.peek_n(1)?.tok, Tok::Ident(_)) && p.peek_n(2)?.tok == Tok::Prime,
        Tok::KwTrue => p.peek_n(1)?.tok != Tok::Colon,
        _ => false,
    };
    let prob = if starts_update {
        Expr::Int(1)
    } else {
        let e = parse_expr(p, model, vars)?;
        p.expect(Tok::Colon, "':'")?;
        e
    };
    let assignments = parse_update(p, model, vars)?;
    Ok(Branch { prob, assignments })
}

fn parse_update(
    p: &mut Parser,
    model: &SymbolicModel,
    vars: &[String],
) -> Result<Vec<(String, Expr)>, ParseError> {
    if p.peek()?.tok == Tok::KwTrue {
        p.next()?;
        return Ok(Vec::new());
    }
    let mut assignments: Vec<(String, Expr)> = Vec::new();
    loop {
        p.expect(Tok::LParen, "'('")?;
        let var = p.expect_ident("variable name")?;
        if model.variable_index(&var).is_none() {
            return Err(p.err_here(ParseErrorKind::UnknownIdentifier(var)));
        }
        if assignments.iter().any(|(v, _)| *v == var) {
            return Err(p.err_here(ParseErrorKind::DuplicateAssignment(var)));
        }
        p.expect(Tok::Prime, "'''")?;
        p.expect(Tok::Eq, "'='")?;
        let rhs = parse_expr(p, model, vars)?;
        p.expect(Tok::RParen, "')'")?;
        assignments.push((var, rhs));
        if p.peek()?.tok == Tok::Amp {
            p.next()?;
        } else {
            return Ok(assignments);
        }
    }
}

fn parse_label(p: &mut Parser, model: &SymbolicModel) -> Result<LabelDef, ParseError> {
    let name = match p.next()? {
        Spanned {
            tok: Tok::Str(s), ..
        } => s,
        other => {
            return Err(ParseError {
                line: other.line,
                col: other.col,
                kind: ParseErrorKind::UnexpectedToken {
                    found: other.tok.describe(),
                    expected: vec!["label name string"],
                },
            })
        }
    };
    if name.is_empty() || !is_identifier(&name) {
        return Err(p.err_here(ParseErrorKind::UnknownIdentifier(name)));
    }
    p.expect(Tok::Eq, "'='")?;
    let vars: Vec<String> = model.variables.iter().map(|v| v.name.clone()).collect();
    let condition = parse_expr(p, model, &vars)?;
    p.expect(Tok::Semi, "';'")?;
    Ok(LabelDef { name, condition })
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// --- expressions -------------------------------------------------------

fn parse_expr(p: &mut Parser, model: &SymbolicModel, vars: &[String]) -> Result<Expr, ParseError> {
    parse_or(p, model, vars, 0)
}

fn parse_or(
    p: &mut Parser,
    model: &SymbolicModel,
    vars: &[String],
    depth: u32,
) -> Result<Expr, ParseError> {
    check_depth(p, depth)?;
    let mut lhs = parse_and(p, model, vars, depth + 1)?;
    while p.peek()?.tok == Tok::Pipe {
        p.next()?;
        let rhs = parse_and(p, model, vars, depth + 1)?;
        lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_and(
    p: &mut Parser,
    model: &SymbolicModel,
    vars: &[String],
    depth: u32,
) -> Result<Expr, ParseError> {
    check_depth(p, depth)?;
    let mut lhs = parse_not(p, model, vars, depth + 1)?;
    while p.peek()?.tok == Tok::Amp {
        p.next()?;
        let rhs = parse_not(p, model, vars, depth + 1)?;
        lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_not(
    p: &mut Parser,
    model: &SymbolicModel,
    vars: &[String],
    depth: u32,
) -> Result<Expr, ParseError> {
    check_depth(p, depth)?;
    if p.peek()?.tok == Tok::Bang {
        p.next()?;
        let inner = parse_not(p, model, vars, depth + 1)?;
        return Ok(Expr::Not(Box::new(inner)));
    }
    parse_comparison(p, model, vars, depth + 1)
}

fn parse_comparison(
    p: &mut Parser,
    model: &SymbolicModel,
    vars: &[String],
    depth: u32,
) -> Result<Expr, ParseError> {
    check_depth(p, depth)?;
    let lhs = parse_add(p, model, vars, depth + 1)?;
    let op = match p.peek()?.tok {
        Tok::Eq => BinOp::Eq,
        Tok::Ne => BinOp::Ne,
        Tok::Lt => BinOp::Lt,
        Tok::Le => BinOp::Le,
        Tok::Gt => BinOp::Gt,
        Tok::Ge => BinOp::Ge,
        _ => return Ok(lhs),
    };
    p.next()?;
    let rhs = parse_add(p, model, vars, depth + 1)?;
    Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
}

fn parse_add(
    p: &mut Parser,
    model: &SymbolicModel,
    vars: &[String],
    depth: u32,
) -> Result<Expr, ParseError> {
    check_depth(p, depth)?;
    let mut lhs = parse_mul(p, model, vars, depth + 1)?;
    loop {
        let op = match p.peek()?.tok {
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            _ => return Ok(lhs),
        };
        p.next()?;
        let rhs = parse_mul(p, model, vars, depth + 1)?;
        lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_mul(
    p: &mut Parser,
    model: &SymbolicModel,
    vars: &[String],
    depth: u32,
) -> Result<Expr, ParseError> {
    check_depth(p, depth)?;
    let mut lhs = parse_unary(p, model, vars, depth + 1)?;
    loop {
        let op = match p.peek()?.tok {
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            _ => return Ok(lhs),
        };
        p.next()?;
        let rhs = parse_unary(p, model, vars, depth + 1)?;
        // fold integer-literal fractions into exact rationals: 1/3
        lhs = match (op, &lhs, &rhs) {
            (BinOp::Div, Expr::Int(a), Expr::Int(b)) if *b != 0 => match Value::ratio(*a, *b) {
                Ok(Value::Int(n)) => Expr::Int(n),
                Ok(Value::Rat(r)) => Expr::Rat(r),
                _ => Expr::Binary(op, Box::new(lhs), Box::new(rhs)),
            },
            _ => Expr::Binary(op, Box::new(lhs), Box::new(rhs)),
        };
    }
}

fn parse_unary(
    p: &mut Parser,
    model: &SymbolicModel,
    vars: &[String],
    depth: u32,
) -> Result<Expr, ParseError> {
    check_depth(p, depth)?;
    if p.peek()?.tok == Tok::Minus {
        p.next()?;
        let inner = parse_unary(p, model, vars, depth + 1)?;
        return Ok(Expr::Neg(Box::new(inner)));
    }
    parse_atom(p, model, vars, depth + 1)
}

fn parse_atom(
    p: &mut Parser,
    model: &SymbolicModel,
    vars: &[String],
    depth: u32,
) -> Result<Expr, ParseError> {
    check_depth(p, depth)?;
    match &p.peek()?.tok {
        Tok::Int(_) => {
            let Spanned {
                tok: Tok::Int(n), ..
            } = p.next()?
            else {
                unreachable!()
            };
            Ok(Expr::Int(n))
        }
        Tok::Decimal(..) => {
            let Spanned {
                tok: Tok::Decimal(num, den),
                line,
                col,
            } = p.next()?
            else {
                unreachable!()
            };
            match Value::ratio(num, den) {
                Ok(Value::Int(n)) => Ok(Expr::Int(n)),
                Ok(Value::Rat(r)) => Ok(Expr::Rat(r)),
                _ => Err(ParseError {
                    line,
                    col,
                    kind: ParseErrorKind::InvalidNumber(format!("{num}/{den}")),
                }),
            }
        }
        Tok::KwTrue => {
            p.next()?;
            Ok(Expr::Bool(true))
        }
        Tok::KwFalse => {
            p.next()?;
            Ok(Expr::Bool(false))
        }
        Tok::LParen => {
            p.next()?;
            let e = parse_or(p, model, vars, depth + 1)?;
            p.expect(Tok::RParen, "')'")?;
            Ok(e)
        }
        Tok::KwMin | Tok::KwMax | Tok::KwMod => {
            let kw = p.next()?.tok;
            p.expect(Tok::LParen, "'('")?;
            let mut args = vec![parse_or(p, model, vars, depth + 1)?];
            while p.peek()?.tok == Tok::Comma {
                p.next()?;
                args.push(parse_or(p, model, vars, depth + 1)?);
            }
            p.expect(Tok::RParen, "')'")?;
            let fold = |args: Vec<Expr>, make: fn(Box<Expr>, Box<Expr>) -> Expr| {
                let mut it = args.into_iter();
                let first = it.next().unwrap();
                it.fold(first, |acc, e| make(Box::new(acc), Box::new(e)))
            };
            match kw {
                Tok::KwMin if args.len() >= 2 => Ok(fold(args, Expr::Min)),
                Tok::KwMax if args.len() >= 2 => Ok(fold(args, Expr::Max)),
                Tok::KwMod if args.len() == 2 => {
                    let mut it = args.into_iter();
                    let a = it.next().unwrap();
                    let b = it.next().unwrap();
                    Ok(Expr::Mod(Box::new(a), Box::new(b)))
                }
                _ => Err(p.err_here(ParseErrorKind::UnexpectedToken {
                    found: "argument list".into(),
                    expected: vec!["two arguments (mod)", "at least two arguments (min/max)"],
                })),
            }
        }
        Tok::Ident(_) => {
            let Spanned {
                tok: Tok::Ident(name),
                line,
                col,
            } = p.next()?
            else {
                unreachable!()
            };
            let known = vars.contains(&name) || model.constant(&name).is_some();
            if !known {
                return Err(ParseError {
                    line,
                    col,
                    kind: ParseErrorKind::UnknownIdentifier(name),
                });
            }
            Ok(Expr::Ident(name))
        }
        _ => Err(p.unexpected(vec!["expression"])),
    }
}

fn check_depth(p: &mut Parser, depth: u32) -> Result<(), ParseError> {
    if depth > MAX_EXPR_DEPTH {
        Err(p.err_here(ParseErrorKind::NestingTooDeep))
    } else {
        Ok(())
    }
}
