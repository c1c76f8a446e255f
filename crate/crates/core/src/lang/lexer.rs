use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::diag::{Diagnostic, DiagnosticCode, Span};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    /// Single-quoted constant, unescaped.
    Quoted(String),
    /// Double-quoted template text, unescaped.
    Str(String),
    Number(f64),
    Directive(String),
    Plus,
    Minus,
    Star,
    Slash,
    Amp,
    Pipe,
    Arrow,
    Tilde,
    Bang,
    Ne,
    EqEq,
    Eq,
    Le,
    Ge,
    Colon,
    Dot,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Caret,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => s.clone(),
            Tok::Quoted(s) => format!("'{s}'"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Number(n) => format!("{n}"),
            Tok::Directive(d) => format!("@{d}"),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Amp => "&".into(),
            Tok::Pipe => "|".into(),
            Tok::Arrow => "->".into(),
            Tok::Tilde => "~".into(),
            Tok::Bang => "!".into(),
            Tok::Ne => "!=".into(),
            Tok::EqEq => "==".into(),
            Tok::Eq => "=".into(),
            Tok::Le => "<=".into(),
            Tok::Ge => ">=".into(),
            Tok::Colon => ":".into(),
            Tok::Dot => ".".into(),
            Tok::Comma => ",".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::LBrace => "{".into(),
            Tok::RBrace => "}".into(),
            Tok::Caret => "^".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.text[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn mark(&self) -> Span {
        Span { start: self.pos, end: self.pos, line: self.line, column: self.column }
    }
}

/// Splits source text into tokens. Lexical errors are collected; the lexer
/// always runs to the end of input.
pub(crate) fn tokenize(text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut cur = Cursor { text, pos: 0, line: 1, column: 1 };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.peek2() == Some('/') {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        let mut span = cur.mark();
        let tok = match c {
            '\'' | '"' => {
                cur.bump();
                match read_quoted(&mut cur, c) {
                    Some(s) if c == '\'' => Tok::Quoted(s),
                    Some(s) => Tok::Str(s),
                    None => {
                        diags.push(
                            Diagnostic::error(DiagnosticCode::UnterminatedQuote, "unterminated quote")
                                .at(span)
                                .with_token(c.to_string_lossy()),
                        );
                        break;
                    }
                }
            }
            '0'..='9' => match read_number(&mut cur) {
                Ok(n) => Tok::Number(n),
                Err(raw) => {
                    diags.push(
                        Diagnostic::error(DiagnosticCode::InvalidNumber, "invalid number")
                            .at(span)
                            .with_token(raw),
                    );
                    continue;
                }
            },
            '@' => {
                cur.bump();
                Tok::Directive(read_ident(&mut cur))
            }
            c if c.is_alphabetic() || c == '_' => Tok::Ident(read_ident(&mut cur)),
            _ => {
                cur.bump();
                let next = cur.peek();
                let two = |cur: &mut Cursor<'_>, t: Tok| {
                    cur.bump();
                    t
                };
                match (c, next) {
                    ('-', Some('>')) => two(&mut cur, Tok::Arrow),
                    ('!', Some('=')) => two(&mut cur, Tok::Ne),
                    ('=', Some('=')) => two(&mut cur, Tok::EqEq),
                    ('<', Some('=')) => two(&mut cur, Tok::Le),
                    ('>', Some('=')) => two(&mut cur, Tok::Ge),
                    ('+', _) => Tok::Plus,
                    ('-', _) => Tok::Minus,
                    ('*', _) => Tok::Star,
                    ('/', _) => Tok::Slash,
                    ('&', _) => Tok::Amp,
                    ('|', _) => Tok::Pipe,
                    ('~', _) => Tok::Tilde,
                    ('!', _) => Tok::Bang,
                    ('=', _) => Tok::Eq,
                    (':', _) => Tok::Colon,
                    ('.', _) => Tok::Dot,
                    (',', _) => Tok::Comma,
                    ('(', _) => Tok::LParen,
                    (')', _) => Tok::RParen,
                    ('{', _) => Tok::LBrace,
                    ('}', _) => Tok::RBrace,
                    ('^', _) => Tok::Caret,
                    _ => {
                        diags.push(
                            Diagnostic::error(
                                DiagnosticCode::UnexpectedToken,
                                format!("unexpected character `{c}`"),
                            )
                            .at(span)
                            .with_token(c.to_string_lossy()),
                        );
                        continue;
                    }
                }
            }
        };
        span.end = cur.pos;
        tokens.push(Token { tok, span });
    }
    (tokens, diags)
}

trait CharExt {
    fn to_string_lossy(self) -> String;
}

impl CharExt for char {
    fn to_string_lossy(self) -> String {
        let mut s = String::new();
        s.push(self);
        s
    }
}

fn read_ident(cur: &mut Cursor<'_>) -> String {
    let start = cur.pos;
    while let Some(c) = cur.peek() {
        if c.is_alphanumeric() || c == '_' {
            cur.bump();
        } else {
            break;
        }
    }
    String::from(&cur.text[start..cur.pos])
}

fn read_quoted(cur: &mut Cursor<'_>, quote: char) -> Option<String> {
    let mut out = String::new();
    loop {
        let c = cur.bump()?;
        if c == '\\' {
            match cur.bump()? {
                e if e == quote || e == '\\' => out.push(e),
                other => {
                    out.push('\\');
                    out.push(other);
                }
            }
        } else if c == quote {
            return Some(out);
        } else {
            out.push(c);
        }
    }
}

fn read_number(cur: &mut Cursor<'_>) -> Result<f64, String> {
    let start = cur.pos;
    let digits = |cur: &mut Cursor<'_>| {
        while matches!(cur.peek(), Some('0'..='9')) {
            cur.bump();
        }
    };
    digits(cur);
    // A dot only continues the number when a digit follows, so `1.` is a
    // number followed by a statement terminator.
    if cur.peek() == Some('.') && matches!(cur.peek2(), Some('0'..='9')) {
        cur.bump();
        digits(cur);
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let save = (cur.pos, cur.line, cur.column);
        cur.bump();
        if matches!(cur.peek(), Some('+' | '-')) {
            cur.bump();
        }
        if matches!(cur.peek(), Some('0'..='9')) {
            digits(cur);
        } else {
            (cur.pos, cur.line, cur.column) = save;
        }
    }
    let raw = &cur.text[start..cur.pos];
    raw.parse::<f64>().map_err(|_| String::from(raw))
}
