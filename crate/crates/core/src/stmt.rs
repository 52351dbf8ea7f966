//! Statement grammar for block contents.
//!
//! Process blocks hold one assignment (`X(i) = newX(i)`, `s = s + p`), decision
//! blocks one condition (`it < iterations`), data blocks a declaration list
//! (`[n] A(n,n+1), e, iterations`). Index positions take integer expressions
//! over dimension parameters and internal variables.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::expr::Op;

#[derive(Clone, Debug, PartialEq)]
pub enum SExpr {
    Num(f64),
    Bool(bool),
    Var { name: String, indices: Vec<SExpr> },
    Unary(Op, Box<SExpr>),
    Binary(Op, Box<SExpr>, Box<SExpr>),
}

impl SExpr {
    /// Operations outside index positions.
    pub fn op_count(&self) -> usize {
        match self {
            SExpr::Num(_) | SExpr::Bool(_) | SExpr::Var { .. } => 0,
            SExpr::Unary(_, a) => 1 + a.op_count(),
            SExpr::Binary(_, a, b) => 1 + a.op_count() + b.op_count(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.op_count() == 0
    }

    /// Calls `f` on every variable name, index positions included.
    pub fn for_each_var(&self, f: &mut impl FnMut(&str)) {
        match self {
            SExpr::Num(_) | SExpr::Bool(_) => {}
            SExpr::Var { name, indices } => {
                f(name);
                for i in indices {
                    i.for_each_var(f);
                }
            }
            SExpr::Unary(_, a) => a.for_each_var(f),
            SExpr::Binary(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Num(x) => write!(f, "{x}"),
            SExpr::Bool(b) => write!(f, "{b}"),
            SExpr::Var { name, indices } => {
                f.write_str(name)?;
                if !indices.is_empty() {
                    f.write_str("(")?;
                    for (k, i) in indices.iter().enumerate() {
                        if k > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{i}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
            SExpr::Unary(Op::Abs, a) => write!(f, "abs({a})"),
            SExpr::Unary(Op::Not, a) => write!(f, "not ({a})"),
            SExpr::Unary(op, a) => write!(f, "{}({a})", op.symbol()),
            SExpr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub name: String,
    pub indices: Vec<SExpr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub target: Target,
    pub rhs: SExpr,
}

/// A declared variable with its shape, e.g. `A(n, n+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeclVar {
    pub name: String,
    pub dims: Vec<SExpr>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Declaration {
    /// Dimension parameters, listed in square brackets.
    pub params: Vec<String>,
    pub vars: Vec<DeclVar>,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("syntax error at {position} in `{text}`: {reason}")]
pub struct StatementSyntaxError {
    pub text: String,
    pub position: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Eq,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Not,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, StatementSyntaxError> {
    let err = |position, reason: &str| StatementSyntaxError {
        text: text.to_string(),
        position,
        reason: reason.to_string(),
    };
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let two = |s: &str| text[i..].starts_with(s);
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b',' => Tok::Comma,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'=' if two("==") => {
                i += 1;
                Tok::EqEq
            }
            b'=' => Tok::Eq,
            b'!' if two("!=") => {
                i += 1;
                Tok::Ne
            }
            b'!' => Tok::Not,
            b'<' if two("<>") => {
                i += 1;
                Tok::Ne
            }
            b'<' if two("<=") => {
                i += 1;
                Tok::Le
            }
            b'<' => Tok::Lt,
            b'>' if two(">=") => {
                i += 1;
                Tok::Ge
            }
            b'>' => Tok::Gt,
            b'&' if two("&&") => {
                i += 1;
                Tok::And
            }
            b'|' if two("||") => {
                i += 1;
                Tok::Or
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let x: f64 = text[i..j].parse().map_err(|_| err(i, "malformed number"))?;
                i = j;
                out.push((start, Tok::Num(x)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = &text[i..j];
                i = j;
                let t = match word {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => Tok::Ident(word.to_string()),
                };
                out.push((start, t));
                continue;
            }
            _ => return Err(err(i, "unexpected character")),
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
    /// Whether a single `=` means equality (conditions) or ends the target (assignments).
    eq_is_comparison: bool,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, eq_is_comparison: bool) -> Result<Self, StatementSyntaxError> {
        Ok(Parser { text, toks: lex(text)?, pos: 0, eq_is_comparison })
    }

    fn err(&self, reason: &str) -> StatementSyntaxError {
        let position = self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.text.len());
        StatementSyntaxError { text: self.text.to_string(), position, reason: reason.to_string() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), StatementSyntaxError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn end(&self) -> Result<(), StatementSyntaxError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input"))
        }
    }

    fn ident(&mut self) -> Result<String, StatementSyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected identifier")),
        }
    }

    fn expr(&mut self) -> Result<SExpr, StatementSyntaxError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and_expr()?;
            lhs = SExpr::Binary(Op::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<SExpr, StatementSyntaxError> {
        let mut lhs = self.not_expr()?;
        while self.eat(&Tok::And) {
            let rhs = self.not_expr()?;
            lhs = SExpr::Binary(Op::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<SExpr, StatementSyntaxError> {
        if self.eat(&Tok::Not) {
            let a = self.not_expr()?;
            return Ok(SExpr::Unary(Op::Not, Box::new(a)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<SExpr, StatementSyntaxError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Some(Tok::Eq) if self.eq_is_comparison => Op::Eq,
            Some(Tok::EqEq) => Op::Eq,
            Some(Tok::Ne) => Op::Ne,
            Some(Tok::Lt) => Op::Lt,
            Some(Tok::Le) => Op::Le,
            Some(Tok::Gt) => Op::Gt,
            Some(Tok::Ge) => Op::Ge,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.additive()?;
        Ok(SExpr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> Result<SExpr, StatementSyntaxError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => Op::Add,
                Some(Tok::Minus) => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = SExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<SExpr, StatementSyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => Op::Mul,
                Some(Tok::Slash) => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = SExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<SExpr, StatementSyntaxError> {
        if self.eat(&Tok::Minus) {
            let a = self.unary()?;
            // a negative literal is a constant, not an operation
            return Ok(match a {
                SExpr::Num(x) => SExpr::Num(-x),
                a => SExpr::Unary(Op::Neg, Box::new(a)),
            });
        }
        if self.eat(&Tok::Plus) {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<SExpr, StatementSyntaxError> {
        match self.peek().cloned() {
            Some(Tok::Num(x)) => {
                self.pos += 1;
                Ok(SExpr::Num(x))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(&Tok::RParen, "expected `)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "true" => return Ok(SExpr::Bool(true)),
                    "false" => return Ok(SExpr::Bool(false)),
                    "abs" if self.peek() == Some(&Tok::LParen) => {
                        self.pos += 1;
                        let e = self.expr()?;
                        self.expect(&Tok::RParen, "expected `)`")?;
                        return Ok(SExpr::Unary(Op::Abs, Box::new(e)));
                    }
                    _ => {}
                }
                let indices = self.index_list()?;
                Ok(SExpr::Var { name, indices })
            }
            _ => Err(self.err("expected operand")),
        }
    }

    fn index_list(&mut self) -> Result<Vec<SExpr>, StatementSyntaxError> {
        let mut indices = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                // index arithmetic never contains `=` comparisons
                let saved = self.eq_is_comparison;
                self.eq_is_comparison = false;
                let e = self.additive();
                self.eq_is_comparison = saved;
                indices.push(e?);
                if self.eat(&Tok::Comma) {
                    continue;
                }
                self.expect(&Tok::RParen, "expected `,` or `)` in index list")?;
                break;
            }
        }
        Ok(indices)
    }
}

/// Parses `target = rhs`.
pub fn parse_assignment(text: &str) -> Result<Assignment, StatementSyntaxError> {
    let mut p = Parser::new(text, false)?;
    let name = p.ident()?;
    if matches!(name.as_str(), "true" | "false" | "abs") {
        return Err(p.err("reserved word cannot be assigned"));
    }
    let indices = p.index_list()?;
    p.expect(&Tok::Eq, "expected `=`")?;
    p.eq_is_comparison = true;
    let rhs = p.expr()?;
    p.end()?;
    Ok(Assignment { target: Target { name, indices }, rhs })
}

/// Parses a decision condition. `=` and `==` both denote equality.
pub fn parse_condition(text: &str) -> Result<SExpr, StatementSyntaxError> {
    let mut p = Parser::new(text, true)?;
    let e = p.expr()?;
    p.end()?;
    Ok(e)
}

/// Parses `[p1, p2] v1, v2(d1, d2), ...`; either part may be absent.
pub fn parse_declaration(text: &str) -> Result<Declaration, StatementSyntaxError> {
    let mut p = Parser::new(text, false)?;
    let mut decl = Declaration::default();
    if p.eat(&Tok::LBracket) {
        if !p.eat(&Tok::RBracket) {
            loop {
                decl.params.push(p.ident()?);
                if p.eat(&Tok::Comma) {
                    continue;
                }
                p.expect(&Tok::RBracket, "expected `,` or `]`")?;
                break;
            }
        }
        p.eat(&Tok::Comma);
    }
    if p.pos < p.toks.len() {
        loop {
            let name = p.ident()?;
            let dims = p.index_list()?;
            decl.vars.push(DeclVar { name, dims });
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
    }
    p.end()?;
    Ok(decl)
}
