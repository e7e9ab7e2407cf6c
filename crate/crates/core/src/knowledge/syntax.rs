//! Clause-level reader for the Prolog-like knowledge files.
//!
//! The reader only knows about clauses, terms and lists. Interpreting a
//! clause as a rule, a declaration or an operation fact is left to the
//! individual loaders.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        SyntaxError {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PTerm {
    Ident(String),
    Var(String),
    Str(String),
    Compound(String, Vec<PTerm>),
    List(Vec<PTerm>),
}

impl PTerm {
    pub fn name(&self) -> Option<&str> {
        match self {
            PTerm::Ident(n) | PTerm::Compound(n, _) => Some(n),
            _ => None,
        }
    }

    pub fn args(&self) -> &[PTerm] {
        match self {
            PTerm::Compound(_, args) => args,
            _ => &[],
        }
    }
}

impl fmt::Display for PTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PTerm::Ident(s) | PTerm::Var(s) => f.write_str(s),
            PTerm::Str(s) => write!(f, "'{s}'"),
            PTerm::Compound(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            PTerm::List(items) => {
                f.write_str("[")?;
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str("]")
            }
        }
    }
}

/// A body item: a term, possibly under default negation (`not p(X)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BodyItem {
    pub negated: bool,
    pub term: PTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub head: Option<PTerm>,
    pub body: Vec<BodyItem>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Dot,
    Neck,
    Less,
    Greater,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    at: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            at: 0,
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn peek_byte(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.at + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.at..].chars().next()?;
        self.at += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek_byte(0) {
                Some(b) if (b as char).is_whitespace() => {
                    self.bump();
                }
                Some(b'%') => {
                    while let Some(b) = self.peek_byte(0) {
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

    fn tokens(mut self) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let pos = self.pos();
            let Some(b) = self.peek_byte(0) else { break };
            let tok = match b {
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b'[' => {
                    self.bump();
                    Tok::LBrack
                }
                b']' => {
                    self.bump();
                    Tok::RBrack
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'.' => {
                    self.bump();
                    Tok::Dot
                }
                b'<' => {
                    self.bump();
                    Tok::Less
                }
                b'>' => {
                    self.bump();
                    Tok::Greater
                }
                b':' if self.peek_byte(1) == Some(b'-') => {
                    self.bump();
                    self.bump();
                    Tok::Neck
                }
                b'\'' | b'"' => {
                    let quote = b as char;
                    self.bump();
                    let mut text = String::new();
                    loop {
                        match self.bump() {
                            None => return Err(SyntaxError::new(pos, "unterminated quoted string")),
                            Some(c) if c == quote => break,
                            Some('\\') => match self.bump() {
                                Some('n') => text.push('\n'),
                                Some(c) => text.push(c),
                                None => {
                                    return Err(SyntaxError::new(pos, "unterminated quoted string"))
                                }
                            },
                            Some(c) => text.push(c),
                        }
                    }
                    Tok::Str(text)
                }
                b if b.is_ascii_alphanumeric() || b == b'_' => {
                    let start = self.at;
                    while let Some(b) = self.peek_byte(0) {
                        if b.is_ascii_alphanumeric() || b == b'_' || b == b'\'' {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let word = self.src[start..self.at].to_string();
                    if crate::symbol::Sym::is_variable_name(&word) {
                        Tok::Var(word)
                    } else {
                        Tok::Ident(word)
                    }
                }
                _ => {
                    let c = self.src[self.at..].chars().next().unwrap_or('?');
                    return Err(SyntaxError::new(pos, format!("unexpected character '{c}'")));
                }
            };
            out.push((tok, pos));
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(t, _)| t.clone());
        self.at += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), SyntaxError> {
        let pos = self.pos();
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(SyntaxError::new(pos, format!("expected {what}, found {t:?}"))),
            None => Err(SyntaxError::new(pos, format!("expected {what}, found end of input"))),
        }
    }

    fn clause(&mut self) -> Result<Clause, SyntaxError> {
        let pos = self.pos();
        let head = if self.peek() == Some(&Tok::Neck) {
            None
        } else {
            Some(self.term()?)
        };
        let mut body = Vec::new();
        if self.peek() == Some(&Tok::Neck) {
            self.next();
            loop {
                body.push(self.body_item()?);
                if self.peek() == Some(&Tok::Comma) {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Dot, "'.'")?;
        Ok(Clause { head, body, pos })
    }

    fn body_item(&mut self) -> Result<BodyItem, SyntaxError> {
        // `not p(X)` is negation; `not(p(X))` is read as a compound and
        // normalised by the caller.
        if let Some(Tok::Ident(w)) = self.peek() {
            if w == "not" && !matches!(self.toks.get(self.at + 1), Some((Tok::LParen, _))) {
                self.next();
                let term = self.term()?;
                return Ok(BodyItem {
                    negated: true,
                    term,
                });
            }
        }
        let term = self.term()?;
        Ok(BodyItem {
            negated: false,
            term,
        })
    }

    /// A term optionally followed by an infix comparison.
    fn term(&mut self) -> Result<PTerm, SyntaxError> {
        let lhs = self.primary()?;
        match self.peek() {
            Some(Tok::Less) => {
                self.next();
                let rhs = self.primary()?;
                Ok(PTerm::Compound("lt".into(), vec![lhs, rhs]))
            }
            Some(Tok::Greater) => {
                self.next();
                let rhs = self.primary()?;
                Ok(PTerm::Compound("lt".into(), vec![rhs, lhs]))
            }
            _ => Ok(lhs),
        }
    }

    fn primary(&mut self) -> Result<PTerm, SyntaxError> {
        let pos = self.pos();
        match self.next() {
            Some(Tok::Var(v)) => Ok(PTerm::Var(v)),
            Some(Tok::Str(s)) => Ok(PTerm::Str(s)),
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.next();
                    let mut args = Vec::new();
                    if self.peek() != Some(&Tok::RParen) {
                        loop {
                            args.push(self.arg()?);
                            if self.peek() == Some(&Tok::Comma) {
                                self.next();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "')'")?;
                    Ok(PTerm::Compound(name, args))
                } else {
                    Ok(PTerm::Ident(name))
                }
            }
            Some(Tok::LBrack) => {
                let mut items = Vec::new();
                if self.peek() != Some(&Tok::RBrack) {
                    loop {
                        items.push(self.arg()?);
                        if self.peek() == Some(&Tok::Comma) {
                            self.next();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBrack, "']'")?;
                Ok(PTerm::List(items))
            }
            Some(t) => Err(SyntaxError::new(pos, format!("unexpected token {t:?}"))),
            None => Err(SyntaxError::new(pos, "unexpected end of input")),
        }
    }

    /// Arguments may carry prefix negation too, e.g. `[not reach(t)]`.
    fn arg(&mut self) -> Result<PTerm, SyntaxError> {
        if let Some(Tok::Ident(w)) = self.peek() {
            if w == "not" && !matches!(self.toks.get(self.at + 1), Some((Tok::LParen, _))) {
                self.next();
                let inner = self.term()?;
                return Ok(PTerm::Compound("not".into(), vec![inner]));
            }
        }
        self.term()
    }
}

/// Splits `src` into clauses.
pub fn read_clauses(src: &str) -> Result<Vec<Clause>, SyntaxError> {
    let lexer = Lexer::new(src);
    let end = {
        let mut line = 1;
        let mut col = 1;
        for c in src.chars() {
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        Pos { line, col }
    };
    let toks = lexer.tokens()?;
    let mut parser = Parser { toks, at: 0, end };
    let mut out = Vec::new();
    while parser.peek().is_some() {
        out.push(parser.clause()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_rules_and_facts() {
        let cs = read_clauses("reach(h).\nreach(X) :- edge(Y, X), reach(Y).\n:- not list.").unwrap();
        assert_eq!(cs.len(), 3);
        assert!(cs[0].body.is_empty());
        assert_eq!(cs[1].body.len(), 2);
        assert!(cs[2].head.is_none());
        assert!(cs[2].body[0].negated);
    }

    #[test]
    fn infix_less_becomes_lt() {
        let cs = read_clauses("p :- key(a, KA), key(b, KB), KA < KB.").unwrap();
        assert_eq!(
            cs[0].body[2].term,
            PTerm::Compound("lt".into(), vec![PTerm::Var("KA".into()), PTerm::Var("KB".into())])
        );
    }

    #[test]
    fn lists_and_not_compound() {
        let cs = read_clauses("precondition(insert, [reach(x), not(reach(target))]).").unwrap();
        let args = cs[0].head.as_ref().unwrap().args();
        let PTerm::List(items) = &args[1] else { panic!() };
        assert_eq!(items[1].name(), Some("not"));
    }

    #[test]
    fn reports_line_and_column() {
        let err = read_clauses("p(a).\nq(b :- r.").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.col > 1);
    }

    #[test]
    fn comments_are_skipped() {
        let cs = read_clauses("% header\np. % trailing\n").unwrap();
        assert_eq!(cs.len(), 1);
    }
}
