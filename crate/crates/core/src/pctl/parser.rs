//! Property parser. Concrete syntax examples:
//!
//! ```text
//! P=? [ F "water" ]
//! P<=0.1 [ F "empty" ]
//! P=? [ "a" U "b" ]
//! P=? [ F<=10 "goal" ]
//! P>0.5 [ X ("a" | !"b") ]
//! ```

use super::{PathFormula, ProbBound, Relation, StateFormula};
use std::fmt;
use thiserror::Error;

const MAX_DEPTH: u32 = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropertyParseError {
    #[error("at byte {at}: unexpected {found}, expected {expected}")]
    Unexpected {
        at: usize,
        found: String,
        expected: &'static str,
    },
    #[error("threshold {0} is outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("reward properties (R operators) are not supported; only P operators are")]
    RewardOperator,
    #[error("invalid number '{0}'")]
    InvalidNumber(String),
    #[error("formula nesting too deep")]
    NestingTooDeep,
    #[error("empty property")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    P,
    R,
    Query, // =?
    Rel(Relation),
    Number(String),
    Ap(String),
    True,
    False,
    Next,     // X
    Finally,  // F
    Globally, // G
    Until,    // U
    And,
    Or,
    Not,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::P => write!(f, "'P'"),
            Tok::R => write!(f, "'R'"),
            Tok::Query => write!(f, "'=?'"),
            Tok::Rel(r) => write!(f, "'{}'", r.symbol()),
            Tok::Number(n) => write!(f, "number '{n}'"),
            Tok::Ap(a) => write!(f, "proposition \"{a}\""),
            Tok::True => write!(f, "'true'"),
            Tok::False => write!(f, "'false'"),
            Tok::Next => write!(f, "'X'"),
            Tok::Finally => write!(f, "'F'"),
            Tok::Globally => write!(f, "'G'"),
            Tok::Until => write!(f, "'U'"),
            Tok::And => write!(f, "'&'"),
            Tok::Or => write!(f, "'|'"),
            Tok::Not => write!(f, "'!'"),
            Tok::LBracket => write!(f, "'['"),
            Tok::RBracket => write!(f, "']'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, PropertyParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b if b.is_ascii_whitespace() => i += 1,
            b'[' => {
                toks.push((Tok::LBracket, i));
                i += 1;
            }
            b']' => {
                toks.push((Tok::RBracket, i));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            b'&' => {
                toks.push((Tok::And, i));
                i += 1;
            }
            b'|' => {
                toks.push((Tok::Or, i));
                i += 1;
            }
            b'!' => {
                toks.push((Tok::Not, i));
                i += 1;
            }
            b'=' => {
                if bytes.get(i + 1) == Some(&b'?') {
                    toks.push((Tok::Query, i));
                    i += 2;
                } else {
                    return Err(PropertyParseError::Unexpected {
                        at: i,
                        found: "'='".into(),
                        expected: "'=?'",
                    });
                }
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push((Tok::Rel(Relation::Le), i));
                    i += 2;
                } else {
                    toks.push((Tok::Rel(Relation::Lt), i));
                    i += 1;
                }
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push((Tok::Rel(Relation::Ge), i));
                    i += 2;
                } else {
                    toks.push((Tok::Rel(Relation::Gt), i));
                    i += 1;
                }
            }
            b'"' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && bytes[j] != b'"' {
                    j += 1;
                }
                if j == bytes.len() {
                    return Err(PropertyParseError::Unexpected {
                        at: i,
                        found: "unterminated string".into(),
                        expected: "closing '\"'",
                    });
                }
                toks.push((Tok::Ap(text[start..j].to_string()), i));
                i = j + 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                toks.push((Tok::Number(text[start..i].to_string()), start));
            }
            b if b.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "P" => Tok::P,
                    "R" | "Rmin" | "Rmax" => Tok::R,
                    "X" => Tok::Next,
                    "F" => Tok::Finally,
                    "G" => Tok::Globally,
                    "U" => Tok::Until,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    other => {
                        return Err(PropertyParseError::Unexpected {
                            at: start,
                            found: format!("'{other}'"),
                            expected: "P, X, F, G, U, true, false or a quoted proposition",
                        })
                    }
                };
                toks.push((tok, start));
            }
            other => {
                return Err(PropertyParseError::Unexpected {
                    at: i,
                    found: format!("'{}'", char::from(other)),
                    expected: "property syntax",
                })
            }
        }
    }
    toks.push((Tok::Eof, text.len()));
    Ok(toks)
}

struct P {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl P {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &'static str) -> PropertyParseError {
        PropertyParseError::Unexpected {
            at: self.at(),
            found: self.peek().to_string(),
            expected,
        }
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> Result<(), PropertyParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }
}

/// Parse a PCTL state formula.
pub fn parse_property(text: &str) -> Result<StateFormula, PropertyParseError> {
    if text.trim().is_empty() {
        return Err(PropertyParseError::Empty);
    }
    let mut p = P {
        toks: lex(text)?,
        pos: 0,
    };
    let formula = parse_or(&mut p, 0)?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of property"));
    }
    Ok(formula)
}

fn parse_or(p: &mut P, depth: u32) -> Result<StateFormula, PropertyParseError> {
    check_depth(depth)?;
    let mut lhs = parse_and(p, depth + 1)?;
    while *p.peek() == Tok::Or {
        p.next();
        let rhs = parse_and(p, depth + 1)?;
        lhs = StateFormula::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_and(p: &mut P, depth: u32) -> Result<StateFormula, PropertyParseError> {
    check_depth(depth)?;
    let mut lhs = parse_unary(p, depth + 1)?;
    while *p.peek() == Tok::And {
        p.next();
        let rhs = parse_unary(p, depth + 1)?;
        lhs = StateFormula::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_unary(p: &mut P, depth: u32) -> Result<StateFormula, PropertyParseError> {
    check_depth(depth)?;
    match p.peek().clone() {
        Tok::Not => {
            p.next();
            Ok(StateFormula::Not(Box::new(parse_unary(p, depth + 1)?)))
        }
        Tok::True => {
            p.next();
            Ok(StateFormula::True)
        }
        Tok::False => {
            p.next();
            Ok(StateFormula::Not(Box::new(StateFormula::True)))
        }
        Tok::Ap(name) => {
            p.next();
            Ok(StateFormula::Ap(name))
        }
        Tok::LParen => {
            p.next();
            let inner = parse_or(p, depth + 1)?;
            p.expect(Tok::RParen, "')'")?;
            Ok(inner)
        }
        Tok::R => Err(PropertyParseError::RewardOperator),
        Tok::P => {
            p.next();
            let bound = parse_bound(p)?;
            p.expect(Tok::LBracket, "'['")?;
            let path = parse_path(p, depth + 1)?;
            p.expect(Tok::RBracket, "']'")?;
            Ok(StateFormula::Prob { bound, path })
        }
        _ => Err(p.unexpected("a state formula")),
    }
}

fn parse_bound(p: &mut P) -> Result<Option<ProbBound>, PropertyParseError> {
    match p.peek().clone() {
        Tok::Query => {
            p.next();
            Ok(None)
        }
        Tok::Rel(relation) => {
            p.next();
            let threshold = parse_number(p)?;
            if !(0.0..=1.0).contains(&threshold) {
                return Err(PropertyParseError::ThresholdOutOfRange(threshold));
            }
            Ok(Some(ProbBound {
                relation,
                threshold,
            }))
        }
        _ => Err(p.unexpected("'=?' or a threshold relation")),
    }
}

fn parse_number(p: &mut P) -> Result<f64, PropertyParseError> {
    match p.peek().clone() {
        Tok::Number(text) => {
            p.next();
            text.parse()
                .map_err(|_| PropertyParseError::InvalidNumber(text))
        }
        _ => Err(p.unexpected("a number")),
    }
}

fn parse_step_bound(p: &mut P) -> Result<Option<u64>, PropertyParseError> {
    if let Tok::Rel(Relation::Le) = p.peek() {
        p.next();
        let text = match p.peek().clone() {
            Tok::Number(t) => t,
            _ => return Err(p.unexpected("a step bound")),
        };
        p.next();
        let k: u64 = text
            .parse()
            .map_err(|_| PropertyParseError::InvalidNumber(text))?;
        return Ok(Some(k));
    }
    Ok(None)
}

fn parse_path(p: &mut P, depth: u32) -> Result<PathFormula, PropertyParseError> {
    check_depth(depth)?;
    match p.peek().clone() {
        Tok::Next => {
            p.next();
            Ok(PathFormula::Next(Box::new(parse_unary(p, depth + 1)?)))
        }
        Tok::Finally => {
            p.next();
            let k = parse_step_bound(p)?;
            let target = Box::new(parse_unary(p, depth + 1)?);
            Ok(match k {
                Some(k) => PathFormula::BoundedUntil(Box::new(StateFormula::True), target, k),
                None => PathFormula::Until(Box::new(StateFormula::True), target),
            })
        }
        Tok::Globally => {
            p.next();
            Ok(PathFormula::Globally(Box::new(parse_unary(p, depth + 1)?)))
        }
        _ => {
            let lhs = Box::new(parse_unary(p, depth + 1)?);
            p.expect(Tok::Until, "'U'")?;
            let k = parse_step_bound(p)?;
            let rhs = Box::new(parse_unary(p, depth + 1)?);
            Ok(match k {
                Some(k) => PathFormula::BoundedUntil(lhs, rhs, k),
                None => PathFormula::Until(lhs, rhs),
            })
        }
    }
}

fn check_depth(depth: u32) -> Result<(), PropertyParseError> {
    if depth > MAX_DEPTH {
        Err(PropertyParseError::NestingTooDeep)
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eventually_query() {
        let f = parse_property("P=? [ F \"water\" ]").unwrap();
        let StateFormula::Prob { bound: None, path } = f else {
            panic!("expected unbounded probability query");
        };
        assert_eq!(
            path,
            PathFormula::Until(
                Box::new(StateFormula::True),
                Box::new(StateFormula::Ap("water".into()))
            )
        );
    }

    #[test]
    fn threshold_bound() {
        let f = parse_property("P<0.1 [ F \"unsafe\" ]").unwrap();
        let StateFormula::Prob {
            bound: Some(bound), ..
        } = f
        else {
            panic!("expected bounded formula");
        };
        assert_eq!(bound.relation, Relation::Lt);
        assert_eq!(bound.threshold, 0.1);
    }

    #[test]
    fn bounded_eventually_with_zero_steps() {
        let f = parse_property("P=? [ F<=0 \"init\" ]").unwrap();
        let StateFormula::Prob { path, .. } = f else {
            panic!()
        };
        assert!(matches!(path, PathFormula::BoundedUntil(_, _, 0)));
    }

    #[test]
    fn until_and_connectives() {
        let f = parse_property("P=? [ (\"a\" & !\"b\") U<=5 (\"c\" | true) ]").unwrap();
        let StateFormula::Prob { path, .. } = f else {
            panic!()
        };
        assert!(matches!(path, PathFormula::BoundedUntil(_, _, 5)));
    }

    #[test]
    fn thresholds_outside_unit_interval_are_rejected() {
        assert!(matches!(
            parse_property("P<=1.5 [ F \"x\" ]"),
            Err(PropertyParseError::ThresholdOutOfRange(_))
        ));
    }

    #[test]
    fn reward_operators_are_rejected_with_a_clear_message() {
        let err = parse_property("R=? [ F \"done\" ]").unwrap_err();
        assert!(err.to_string().contains("not supported"));
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "P=? [ F \"water\" ]",
            "P<=0.1 [ F \"empty\" ]",
            "P=? [ \"a\" U \"b\" ]",
            "P=? [ F<=10 \"goal\" ]",
            "P>0.5 [ X (\"a\" | !\"b\") ]",
            "P=? [ G !\"bad\" ]",
        ] {
            let f = parse_property(text).unwrap();
            let g = parse_property(&f.to_string()).unwrap();
            assert_eq!(f, g, "{text} -> {f}");
        }
    }
}
