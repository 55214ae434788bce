//! Potential functions `v(x)` given as text.
//!
//! Grammar, lowest precedence first, all binary operators left associative:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' primary)*
//! primary := number | 'x' | ident | func '(' sum ')' | '(' sum ')'
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbound parameter `{0}`")]
    Unbound(String),
    #[error("exponent {0} is not a nonnegative integer")]
    NonIntegerExponent(f64),
    #[error("evaluation produced a non-finite value ({0}) at x = {1}")]
    NonFinite(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Parsed potential.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialExpr {
    Num(f64),
    X,
    Param(String),
    Neg(Box<PotentialExpr>),
    Bin(BinOp, Box<PotentialExpr>, Box<PotentialExpr>),
    Call(Func, Box<PotentialExpr>),
}

/// Parameter bindings.
pub type Bindings = HashMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let done = t.0 == Tok::End;
            out.push(t);
            if done {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'0'..=b'9' | b'.' => self.number()?,
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                Tok::Ident(self.src[start..self.pos].to_string())
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax { offset: start, message: format!("unexpected character `{ch}`") });
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self) -> Result<Tok, ExprError> {
        let start = self.pos;
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.peek().is_some_and(|c| c.is_ascii_digit()) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(ExprError::Syntax { offset: start, message: "malformed number".into() });
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| ExprError::Syntax { offset: start, message: format!("malformed number `{text}`") })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn error<T>(&self, message: &str) -> Result<T, ExprError> {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
        };
        Err(ExprError::Syntax { offset: self.offset(), message: format!("{message}, found {found}") })
    }

    fn sum(&mut self) -> Result<PotentialExpr, ExprError> {
        let mut lhs = self.product()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = PotentialExpr::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<PotentialExpr, ExprError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = PotentialExpr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PotentialExpr, ExprError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(PotentialExpr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<PotentialExpr, ExprError> {
        let mut lhs = self.primary()?;
        while *self.peek() == Tok::Op('^') {
            self.bump();
            lhs = PotentialExpr::Bin(BinOp::Pow, Box::new(lhs), Box::new(self.primary()?));
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<PotentialExpr, ExprError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(PotentialExpr::Num(v))
            }
            Tok::Ident(name) => {
                let (_, at) = self.bump();
                if *self.peek() == Tok::LParen {
                    let f = Func::from_name(&name).ok_or(ExprError::UnknownFunction { name, offset: at })?;
                    self.bump();
                    let arg = self.sum()?;
                    self.expect_rparen()?;
                    return Ok(PotentialExpr::Call(f, Box::new(arg)));
                }
                if name == "x" {
                    Ok(PotentialExpr::X)
                } else {
                    Ok(PotentialExpr::Param(name))
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.sum()?;
                self.expect_rparen()?;
                Ok(e)
            }
            _ => self.error("expected an operand"),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if *self.peek() != Tok::RParen {
            return self.error("expected `)`");
        }
        self.bump();
        Ok(())
    }
}

impl PotentialExpr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let mut p = Parser { toks: Lexer::tokens(src)?, i: 0 };
        let e = p.sum()?;
        if *p.peek() != Tok::End {
            return p.error("unexpected trailing input");
        }
        Ok(e)
    }

    /// Named parameters referenced by the expression, sorted.
    pub fn parameters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            PotentialExpr::Num(_) | PotentialExpr::X => {}
            PotentialExpr::Param(p) => {
                out.insert(p.clone());
            }
            PotentialExpr::Neg(e) | PotentialExpr::Call(_, e) => e.collect_params(out),
            PotentialExpr::Bin(_, a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
        }
    }

    /// Error unless every parameter is bound.
    pub fn check_bound(&self, params: &Bindings) -> Result<(), ExprError> {
        match self.parameters().into_iter().find(|p| !params.contains_key(p)) {
            Some(p) => Err(ExprError::Unbound(p)),
            None => Ok(()),
        }
    }

    /// Evaluates at `x`; non-finite results are errors.
    pub fn eval(&self, x: f64, params: &Bindings) -> Result<f64, ExprError> {
        let v = self.eval_raw(x, params)?;
        if !v.is_finite() {
            return Err(ExprError::NonFinite(v, x));
        }
        Ok(v)
    }

    fn eval_raw(&self, x: f64, params: &Bindings) -> Result<f64, ExprError> {
        Ok(match self {
            PotentialExpr::Num(v) => *v,
            PotentialExpr::X => x,
            PotentialExpr::Param(p) => *params.get(p).ok_or_else(|| ExprError::Unbound(p.clone()))?,
            PotentialExpr::Neg(e) => -e.eval_raw(x, params)?,
            PotentialExpr::Call(f, e) => f.apply(e.eval_raw(x, params)?),
            PotentialExpr::Bin(op, a, b) => {
                let a = a.eval_raw(x, params)?;
                let b = b.eval_raw(x, params)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => {
                        if !(b >= 0.0 && b.fract() == 0.0 && b <= i32::MAX as f64) {
                            return Err(ExprError::NonIntegerExponent(b));
                        }
                        a.powi(b as i32)
                    }
                }
            }
        })
    }

    /// Evaluates on every sample, failing on the first error.
    pub fn eval_all(&self, xs: &[f64], params: &Bindings) -> Result<Vec<f64>, ExprError> {
        self.check_bound(params)?;
        xs.iter().map(|&x| self.eval(x, params)).collect()
    }
}

/// Canonical printing: every compound subexpression is parenthesized, so
/// the output reparses to the same tree.
impl fmt::Display for PotentialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialExpr::Num(v) => write!(f, "{v:?}"),
            PotentialExpr::X => write!(f, "x"),
            PotentialExpr::Param(p) => write!(f, "{p}"),
            PotentialExpr::Neg(e) => write!(f, "(-{e})"),
            PotentialExpr::Call(func, e) => write!(f, "{}({e})", func.name()),
            PotentialExpr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

impl std::str::FromStr for PotentialExpr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, ExprError> {
        PotentialExpr::parse(s)
    }
}
