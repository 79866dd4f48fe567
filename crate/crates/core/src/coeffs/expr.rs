//! Arithmetic expressions in `t` (continuous time) and `k` (node index).
//!
//! Grammar, lowest precedence first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 't' | 'k' | 'pi' | 'e'
//!          | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'exp' | 'ln' | 'abs' | 'floor'
//! number  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-2^2 = -4`
//! and `2^-1 = 0.5`. Operators, calls and parentheses together may appear at
//! most [`MAX_COMPLEXITY`] times.

use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};

/// Limit on operators, calls and parenthesis levels in one expression.
pub const MAX_COMPLEXITY: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Abs,
    Floor,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Floor => "floor",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            "floor" => Func::Floor,
            _ => return None,
        })
    }
}

/// Expression tree. Literals produced by the parser are never negative.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Var(v) => *v == var,
            Expr::Num(_) | Expr::Const(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses(var),
            Expr::Binary(_, l, r) => l.uses(var) || r.uses(var),
        }
    }

    fn eval(&self, t: f64, k: f64) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::K) => k,
            Expr::Const(Constant::Pi) => std::f64::consts::PI,
            Expr::Const(Constant::E) => std::f64::consts::E,
            Expr::Neg(e) => -e.eval(t, k)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(t, k)?;
                let b = r.eval(t, k)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::eval(format!("division by zero in `{self}`")));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, e) => {
                let x = e.eval(t, k)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Ln => {
                        if x <= 0.0 {
                            return Err(Error::eval(format!("ln of nonpositive value {x}")));
                        }
                        x.ln()
                    }
                    Func::Abs => x.abs(),
                    Func::Floor => x.floor(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::eval(format!("non-finite result of `{self}`")))
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v:?})")
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Var(Var::K) => f.write_str("k"),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                child(f, e, e.precedence() < 3)
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Binary(op, l, r) => {
                let p = self.precedence();
                if *op == BinOp::Pow {
                    child(f, l, l.precedence() <= 4)?;
                    f.write_str("^")?;
                    child(f, r, r.precedence() < 3)
                } else {
                    child(f, l, l.precedence() < p)?;
                    f.write_str(match op {
                        BinOp::Add => " + ",
                        BinOp::Sub => " - ",
                        BinOp::Mul => " * ",
                        _ => " / ",
                    })?;
                    child(f, r, r.precedence() <= p)
                }
            }
        }
    }
}

/// A parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Expr,
}

impl Expression {
    pub fn parse(src: &str) -> std::result::Result<Self, ParseError> {
        let mut p = Parser { src, pos: 0, budget: MAX_COMPLEXITY };
        p.skip_ws();
        if p.pos == src.len() {
            return Err(p.error("empty expression"));
        }
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expression { root })
    }

    pub fn from_expr(root: Expr) -> Self {
        Expression { root }
    }

    /// A literal, written as a negated literal when `v < 0`.
    pub fn number(v: f64) -> Self {
        let root = if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
            Expr::Neg(Box::new(Expr::Num(-v)))
        } else {
            Expr::Num(v)
        };
        Expression { root }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn uses(&self, var: Var) -> bool {
        self.root.uses(var)
    }

    /// Evaluates with `t` and `k` bound.
    pub fn eval(&self, t: f64, k: f64) -> Result<f64> {
        self.root.eval(t, k)
    }

    pub fn eval_t(&self, t: f64) -> Result<f64> {
        self.root.eval(t, f64::NAN)
    }

    pub fn eval_k(&self, k: i64) -> Result<f64> {
        self.root.eval(f64::NAN, k as f64)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl std::str::FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, ParseError> {
        Expression::parse(s)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    budget: usize,
}

type PResult<T> = std::result::Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn spend(&mut self) -> PResult<()> {
        if self.budget == 0 {
            return Err(self.error("expression too complex"));
        }
        self.budget -= 1;
        Ok(())
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.spend()?;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            self.spend()?;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(b'-') {
            self.spend()?;
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if self.eat(b'^') {
            self.spend()?;
            let exp = self.unary()?;
            Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.spend()?;
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => {
                let ch = self.src[self.pos..].chars().next().unwrap_or('?');
                Err(self.error(format!("unexpected character `{ch}`")))
            }
        }
    }

    fn number(&mut self) -> PResult<Expr> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            let s = *p;
            while bytes.get(*p).is_some_and(u8::is_ascii_digit) {
                *p += 1;
            }
            *p - s
        };
        let mut p = self.pos;
        let mut count = digits(&mut p);
        if bytes.get(p) == Some(&b'.') {
            p += 1;
            count += digits(&mut p);
        }
        if count == 0 {
            return Err(self.error("malformed number"));
        }
        if matches!(bytes.get(p), Some(b'e' | b'E')) {
            let mut q = p + 1;
            if matches!(bytes.get(q), Some(b'+' | b'-')) {
                q += 1;
            }
            // a bare `e` after a number is not an exponent (e.g. `2e` is rejected below)
            if digits(&mut q) == 0 {
                self.pos = p;
                return Err(self.error("malformed exponent"));
            }
            p = q;
        }
        let text = &self.src[start..p];
        let v: f64 = text.parse().map_err(|_| self.error("malformed number"))?;
        if !v.is_finite() {
            return Err(self.error("number out of range"));
        }
        self.pos = p;
        Ok(Expr::Num(v))
    }

    fn ident(&mut self) -> PResult<Expr> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while bytes
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        match name {
            "t" => Ok(Expr::Var(Var::T)),
            "k" => Ok(Expr::Var(Var::K)),
            "pi" => Ok(Expr::Const(Constant::Pi)),
            "e" => Ok(Expr::Const(Constant::E)),
            _ => match Func::from_name(name) {
                Some(func) => {
                    self.spend()?;
                    if !self.eat(b'(') {
                        return Err(self.error(format!("expected `(` after `{name}`")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.error("expected `)`"));
                    }
                    Ok(Expr::Call(func, Box::new(arg)))
                }
                None => {
                    self.pos = start;
                    Err(self.error(format!("unknown identifier `{name}`")))
                }
            },
        }
    }
}
