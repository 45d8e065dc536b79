//! Canonical printing. `parse_model(print_model(m)) == m` for every model
//! the parser accepts.

use super::{BinOp, Expr, SymbolicModel};
use std::fmt::{self, Write as _};

// binding strength, higher binds tighter
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Or, ..) => 1,
        Expr::Binary(BinOp::And, ..) => 2,
        Expr::Not(_) => 3,
        Expr::Binary(BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge, ..) => {
            4
        }
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 5,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 6,
        Expr::Neg(_) => 7,
        _ => 8,
    }
}

fn op_str(op: BinOp) -> &'static str {
    match op {
        BinOp::Or => "|",
        BinOp::And => "&",
        BinOp::Eq => "=",
        BinOp::Ne => "!=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
    }
}

fn write_child(f: &mut dyn fmt::Write, child: &Expr, parent_prec: u8) -> fmt::Result {
    if precedence(child) < parent_prec {
        f.write_char('(')?;
        write_expr(f, child)?;
        f.write_char(')')
    } else {
        write_expr(f, child)
    }
}

pub(crate) fn write_expr(f: &mut dyn fmt::Write, e: &Expr) -> fmt::Result {
    match e {
        Expr::Int(n) => write!(f, "{n}"),
        Expr::Rat(r) => write!(f, "{r}"),
        Expr::Bool(b) => write!(f, "{b}"),
        Expr::Ident(name) => f.write_str(name),
        Expr::Neg(inner) => {
            f.write_char('-')?;
            write_child(f, inner, precedence(e) + 1)
        }
        Expr::Not(inner) => {
            f.write_char('!')?;
            write_child(f, inner, precedence(e) + 1)
        }
        Expr::Binary(op, a, b) => {
            let prec = precedence(e);
            write_child(f, a, prec)?;
            write!(f, " {} ", op_str(*op))?;
            // print right children one level tighter so left-associative
            // reparsing reproduces the tree
            write_child(f, b, prec + 1)
        }
        Expr::Min(a, b) => {
            f.write_str("min(")?;
            write_expr(f, a)?;
            f.write_str(", ")?;
            write_expr(f, b)?;
            f.write_char(')')
        }
        Expr::Max(a, b) => {
            f.write_str("max(")?;
            write_expr(f, a)?;
            f.write_str(", ")?;
            write_expr(f, b)?;
            f.write_char(')')
        }
        Expr::Mod(a, b) => {
            f.write_str("mod(")?;
            write_expr(f, a)?;
            f.write_str(", ")?;
            write_expr(f, b)?;
            f.write_char(')')
        }
    }
}

fn expr_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e).expect("writing to String cannot fail");
    s
}

/// Render the model in its canonical text form.
pub fn print_model(model: &SymbolicModel) -> String {
    let mut out = String::new();
    out.push_str("mdp\n\n");
    for c in &model.constants {
        let kind = match c.kind {
            super::ConstKind::Int => "int",
            super::ConstKind::Double => "double",
        };
        match &c.value {
            Some(v) => {
                let _ = writeln!(out, "const {kind} {} = {};", c.name, expr_string(v));
            }
            None => {
                let _ = writeln!(out, "const {kind} {};", c.name);
            }
        }
    }
    if !model.constants.is_empty() {
        out.push('\n');
    }
    let _ = writeln!(out, "module {}", model.module_name);
    for v in &model.variables {
        let _ = writeln!(
            out,
            "  {} : [{}..{}] init {};",
            v.name,
            expr_string(&v.lower),
            expr_string(&v.upper),
            expr_string(&v.init)
        );
    }
    if !model.variables.is_empty() && !model.commands.is_empty() {
        out.push('\n');
    }
    for cmd in &model.commands {
        let branches = cmd
            .branches
            .iter()
            .map(|b| {
                let update = if b.assignments.is_empty() {
                    "true".to_string()
                } else {
                    b.assignments
                        .iter()
                        .map(|(v, e)| format!("({v}'={})", expr_string(e)))
                        .collect::<Vec<_>>()
                        .join(" & ")
                };
                format!("{} : {}", expr_string(&b.prob), update)
            })
            .collect::<Vec<_>>()
            .join(" + ");
        let _ = writeln!(
            out,
            "  [{}] {} -> {};",
            cmd.action,
            expr_string(&cmd.guard),
            branches
        );
    }
    out.push_str("endmodule\n");
    if !model.labels.is_empty() {
        out.push('\n');
        for l in &model.labels {
            let _ = writeln!(out, "label \"{}\" = {};", l.name, expr_string(&l.condition));
        }
    }
    for r in &model.rewards {
        out.push('\n');
        let _ = writeln!(out, "rewards\n{}\nendrewards", r.raw);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_model;

    fn round_trip(src: &str) {
        let m = parse_model(src).unwrap();
        let printed = m.to_canonical_string();
        let reparsed = parse_model(&printed)
            .unwrap_or_else(|e| panic!("canonical form failed to reparse: {e}\n{printed}"));
        assert_eq!(m, reparsed, "canonical form changed the model:\n{printed}");
    }

    #[test]
    fn round_trips() {
        round_trip("mdp module m x:[0..3] init 0; [up] x<3 -> 1.0:(x'=x+1); endmodule");
        round_trip(
            "mdp const int N = 4; const double p = 0.25; const int M;\n\
             module m x:[0..N] init 0; y: bool init true;\n\
             [a] x<N & !(y=1) -> p:(x'=min(x+1, N)) + 0.75:true;\n\
             [b] mod(x, 2) = 0 | y=0 -> (x'=max(x-1, 0)) & (y'=1-y);\n\
             endmodule\n\
             label \"done\" = x=N;\n\
             rewards [a] true : 1; endrewards",
        );
        round_trip(
            "mdp module m x:[-3..3] init -1; [a] true -> 1/3:(x'=0-x) + 2/3:(x'=-x*-1); endmodule",
        );
    }

    #[test]
    fn precedence_survives_printing() {
        round_trip(
            "mdp module m x:[0..9] init 0;\n\
             [a] x+1*2 = 2 & x<3 | !(x=4) -> (x'=(x+1)*2-3/3+x);\n\
             endmodule",
        );
    }
}
