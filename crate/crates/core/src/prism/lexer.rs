//! Hand-rolled lexer with line/column tracking.

use super::parser::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    // decimal literal, already split into numerator/denominator
    Decimal(i64, i64),
    Str(String),
    // keywords
    KwMdp,
    KwModule,
    KwEndModule,
    KwConst,
    KwInt,
    KwDouble,
    KwBool,
    KwInit,
    KwLabel,
    KwRewards,
    KwEndRewards,
    KwTrue,
    KwFalse,
    KwMin,
    KwMax,
    KwMod,
    // punctuation
    LBracket,
    RBracket,
    LParen,
    RParen,
    Semi,
    Colon,
    Comma,
    DotDot,
    Prime,
    Arrow,
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
    Plus,
    Minus,
    Star,
    Slash,
    Amp,
    Pipe,
    Bang,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Int(n) => format!("integer '{n}'"),
            Tok::Decimal(n, d) => format!("decimal '{n}/{d}'"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::KwMdp => "'mdp'".into(),
            Tok::KwModule => "'module'".into(),
            Tok::KwEndModule => "'endmodule'".into(),
            Tok::KwConst => "'const'".into(),
            Tok::KwInt => "'int'".into(),
            Tok::KwDouble => "'double'".into(),
            Tok::KwBool => "'bool'".into(),
            Tok::KwInit => "'init'".into(),
            Tok::KwLabel => "'label'".into(),
            Tok::KwRewards => "'rewards'".into(),
            Tok::KwEndRewards => "'endrewards'".into(),
            Tok::KwTrue => "'true'".into(),
            Tok::KwFalse => "'false'".into(),
            Tok::KwMin => "'min'".into(),
            Tok::KwMax => "'max'".into(),
            Tok::KwMod => "'mod'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Semi => "';'".into(),
            Tok::Colon => "':'".into(),
            Tok::Comma => "','".into(),
            Tok::DotDot => "'..'".into(),
            Tok::Prime => "'''".into(),
            Tok::Arrow => "'->'".into(),
            Tok::Eq => "'='".into(),
            Tok::Ne => "'!='".into(),
            Tok::Le => "'<='".into(),
            Tok::Lt => "'<'".into(),
            Tok::Ge => "'>='".into(),
            Tok::Gt => "'>'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Amp => "'&'".into(),
            Tok::Pipe => "'|'".into(),
            Tok::Bang => "'!'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub(crate) struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek2() == Some(b'/') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            kind,
        }
    }

    /// Capture raw text until the `endrewards` keyword, exclusive.
    /// Used by the parser after seeing `rewards`.
    pub fn capture_until_endrewards(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        loop {
            if self.pos >= self.src.len() {
                return Err(self.err(ParseErrorKind::UnexpectedToken {
                    found: "end of input".into(),
                    expected: vec!["'endrewards'"],
                }));
            }
            if self.src[self.pos..].starts_with(b"endrewards")
                && !self
                    .src
                    .get(self.pos + "endrewards".len())
                    .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
            {
                let raw = String::from_utf8_lossy(&self.src[start..self.pos])
                    .trim()
                    .to_string();
                for _ in 0.."endrewards".len() {
                    self.bump();
                }
                return Ok(raw);
            }
            self.bump();
        }
    }

    pub fn next_token(&mut self) -> Result<Spanned, ParseError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let spanned = |tok| Spanned { tok, line, col };
        let Some(b) = self.peek() else {
            return Ok(spanned(Tok::Eof));
        };
        let tok = match b {
            b'[' => {
                self.bump();
                Tok::LBracket
            }
            b']' => {
                self.bump();
                Tok::RBracket
            }
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b';' => {
                self.bump();
                Tok::Semi
            }
            b':' => {
                self.bump();
                Tok::Colon
            }
            b',' => {
                self.bump();
                Tok::Comma
            }
            b'\'' => {
                self.bump();
                Tok::Prime
            }
            b'+' => {
                self.bump();
                Tok::Plus
            }
            b'*' => {
                self.bump();
                Tok::Star
            }
            b'/' => {
                self.bump();
                Tok::Slash
            }
            b'&' => {
                self.bump();
                Tok::Amp
            }
            b'|' => {
                self.bump();
                Tok::Pipe
            }
            b'=' => {
                self.bump();
                Tok::Eq
            }
            b'-' => {
                self.bump();
                if self.peek() == Some(b'>') {
                    self.bump();
                    Tok::Arrow
                } else {
                    Tok::Minus
                }
            }
            b'!' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Tok::Ne
                } else {
                    Tok::Bang
                }
            }
            b'<' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Tok::Le
                } else {
                    Tok::Lt
                }
            }
            b'>' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            b'.' => {
                self.bump();
                if self.peek() == Some(b'.') {
                    self.bump();
                    Tok::DotDot
                } else {
                    return Err(self.err(ParseErrorKind::UnexpectedChar('.')));
                }
            }
            b'"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some(b'"') => break,
                        Some(c) if c != b'\n' => s.push(c as char),
                        _ => {
                            return Err(self.err(ParseErrorKind::UnterminatedString));
                        }
                    }
                }
                Tok::Str(s)
            }
            b'0'..=b'9' => return self.lex_number(line, col),
            b if b.is_ascii_alphabetic() || b == b'_' => {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        s.push(c as char);
                        self.bump();
                    } else {
                        break;
                    }
                }
                match s.as_str() {
                    "mdp" => Tok::KwMdp,
                    "module" => Tok::KwModule,
                    "endmodule" => Tok::KwEndModule,
                    "const" => Tok::KwConst,
                    "int" => Tok::KwInt,
                    "double" => Tok::KwDouble,
                    "bool" => Tok::KwBool,
                    "init" => Tok::KwInit,
                    "label" => Tok::KwLabel,
                    "rewards" => Tok::KwRewards,
                    "endrewards" => Tok::KwEndRewards,
                    "true" => Tok::KwTrue,
                    "false" => Tok::KwFalse,
                    "min" => Tok::KwMin,
                    "max" => Tok::KwMax,
                    "mod" => Tok::KwMod,
                    _ => Tok::Ident(s),
                }
            }
            other => {
                let c = char::from(other);
                return Err(self.err(ParseErrorKind::UnexpectedChar(c)));
            }
        };
        Ok(spanned(tok))
    }

    fn lex_number(&mut self, line: u32, col: u32) -> Result<Spanned, ParseError> {
        let mut digits = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits.push(c as char);
                self.bump();
            } else {
                break;
            }
        }
        // decimal part, but not the '..' range operator
        if self.peek() == Some(b'.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            let mut frac = String::new();
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    frac.push(c as char);
                    self.bump();
                } else {
                    break;
                }
            }
            let text = format!("{digits}.{frac}");
            let num: i64 = format!("{digits}{frac}").parse().map_err(|_| ParseError {
                line,
                col,
                kind: ParseErrorKind::InvalidNumber(text.clone()),
            })?;
            let den = 10i64.checked_pow(frac.len() as u32).ok_or(ParseError {
                line,
                col,
                kind: ParseErrorKind::InvalidNumber(text),
            })?;
            return Ok(Spanned {
                tok: Tok::Decimal(num, den),
                line,
                col,
            });
        }
        let n: i64 = digits.parse().map_err(|_| ParseError {
            line,
            col,
            kind: ParseErrorKind::InvalidNumber(digits.clone()),
        })?;
        Ok(Spanned {
            tok: Tok::Int(n),
            line,
            col,
        })
    }
}
