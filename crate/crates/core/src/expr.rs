//! Scalar expressions over named real variables.
//!
//! Expressions are parsed against a declared variable list; variables are
//! stored by index so evaluation takes a plain `&[f64]` point. Every analytic
//! derivative used elsewhere in the crate is produced by [`Expr::diff`].
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := "-" factor | base ("^" integer)?
//! base   := number | ident | ident "(" expr ")" | "(" expr ")"
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`. Exponents are
//! constant integers, optionally signed (`x^-1`).

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Empty => None,
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                Some(*offset)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of nonpositive argument {0}")]
    LogDomain(f64),
    #[error("sqrt of negative argument {0}")]
    SqrtDomain(f64),
    #[error("zero raised to negative power {0}")]
    ZeroToNegativePower(i32),
    #[error("non-finite result")]
    NonFinite,
    #[error("point has {got} coordinates, expression needs {needed}")]
    Arity { needed: usize, got: usize },
    #[error("variable `{0}` is not bound")]
    Unbound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> Result<f64, EvalError> {
        match self {
            Func::Sin => Ok(v.sin()),
            Func::Cos => Ok(v.cos()),
            Func::Exp => Ok(v.exp()),
            Func::Log if v <= 0.0 => Err(EvalError::LogDomain(v)),
            Func::Log => Ok(v.ln()),
            Func::Sqrt if v < 0.0 => Err(EvalError::SqrtDomain(v)),
            Func::Sqrt => Ok(v.sqrt()),
        }
    }
}

/// Expression tree. `Var(i)` refers to the `i`-th declared variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

pub fn parse(source: &str, variables: &[&str]) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        src: source.as_bytes(),
        pos: 0,
        vars: variables,
    };
    parser.skip_ws();
    if parser.at_end() {
        return Err(ParseError::Empty);
    }
    let e = parser.expr()?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
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

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let exp = self.integer()?;
            return Ok(Expr::Pow(Box::new(base), exp));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits {
            return Err(self.error("expected integer exponent"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "exponent out of range".into(),
        })
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Num(v)),
            _ => Err(ParseError::Syntax {
                offset: start,
                message: format!("invalid number `{text}`"),
            }),
        }
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        if let Some(i) = self.vars.iter().position(|v| *v == name) {
            return Ok(Expr::Var(i));
        }
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.error("expected `(` after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        if name == "pi" {
            return Ok(Expr::Num(std::f64::consts::PI));
        }
        Err(ParseError::UnknownIdentifier {
            name: name.to_string(),
            offset: start,
        })
    }
}

// Smart constructors with the conservative simplifications used by `diff`.

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        (a, b) if is_num(&a, 0.0) => b,
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) if is_num(&a, 0.0) => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        (a, b) if is_num(&a, 0.0) || is_num(&b, 0.0) => Expr::Num(0.0),
        (a, b) if is_num(&a, 1.0) => b,
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, b) if is_num(&a, 0.0) && !is_num(&b, 0.0) => Expr::Num(0.0),
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn pow(a: Expr, n: i32) -> Expr {
    match n {
        0 => Expr::Num(1.0),
        1 => a,
        _ => Expr::Pow(Box::new(a), n),
    }
}

impl Expr {
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let v = self.eval_raw(point)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn eval_raw(&self, p: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => *p.get(*i).ok_or(EvalError::Arity {
                needed: i + 1,
                got: p.len(),
            })?,
            Expr::Neg(a) => -a.eval_raw(p)?,
            Expr::Call(f, a) => f.apply(a.eval_raw(p)?)?,
            Expr::Add(a, b) => a.eval_raw(p)? + b.eval_raw(p)?,
            Expr::Sub(a, b) => a.eval_raw(p)? - b.eval_raw(p)?,
            Expr::Mul(a, b) => a.eval_raw(p)? * b.eval_raw(p)?,
            Expr::Div(a, b) => {
                let den = b.eval_raw(p)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval_raw(p)? / den
            }
            Expr::Pow(a, n) => {
                let base = a.eval_raw(p)?;
                if base == 0.0 && *n < 0 {
                    return Err(EvalError::ZeroToNegativePower(*n));
                }
                base.powi(*n)
            }
        })
    }

    /// Evaluates with variables bound by name; `variables` is the list the
    /// expression was parsed against.
    pub fn eval_named(
        &self,
        variables: &[&str],
        point: &HashMap<String, f64>,
    ) -> Result<f64, EvalError> {
        let values = variables
            .iter()
            .map(|name| {
                point
                    .get(*name)
                    .copied()
                    .ok_or_else(|| EvalError::Unbound(name.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.eval(&values)
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(i) => Expr::Num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                let da = a.diff(var);
                let db = b.diff(var);
                if is_num(&db, 0.0) {
                    div(da, (**b).clone())
                } else {
                    div(
                        sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                        pow((**b).clone(), 2),
                    )
                }
            }
            Expr::Pow(a, n) => {
                let da = a.diff(var);
                if is_num(&da, 0.0) {
                    return Expr::Num(0.0);
                }
                mul(mul(Expr::Num(*n as f64), pow((**a).clone(), n - 1)), da)
            }
            Expr::Call(f, a) => {
                let da = a.diff(var);
                if is_num(&da, 0.0) {
                    return Expr::Num(0.0);
                }
                let arg = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::Call(Func::Cos, Box::new(arg)),
                    Func::Cos => neg(Expr::Call(Func::Sin, Box::new(arg))),
                    Func::Exp => self.clone(),
                    Func::Log => div(Expr::Num(1.0), arg),
                    Func::Sqrt => div(Expr::Num(0.5), self.clone()),
                };
                mul(outer, da)
            }
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) | Expr::Pow(a, _) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        is_num(self, 0.0)
    }

    /// Renders the expression with the given variable names. The output
    /// parses back to the same tree.
    pub fn display<'a>(&'a self, variables: &'a [&'a str]) -> Display<'a> {
        Display {
            expr: self,
            vars: variables,
        }
    }
}

pub struct Display<'a> {
    expr: &'a Expr,
    vars: &'a [&'a str],
}

impl Display<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |e: &Expr, f: &mut fmt::Formatter<'_>, wrap: bool| {
            if wrap {
                write!(f, "(")?;
                self.write(e, f)?;
                write!(f, ")")
            } else {
                self.write(e, f)
            }
        };
        match e {
            Expr::Num(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => match self.vars.get(*i) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "_v{i}"),
            },
            Expr::Neg(a) => {
                write!(f, "-")?;
                child(a, f, prec(a) < 3)
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write(a, f)?;
                write!(f, ")")
            }
            Expr::Pow(a, n) => {
                child(a, f, prec(a) < 5)?;
                write!(f, "^{n}")
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                child(a, f, prec(a) < 1)?;
                write!(f, "{}", if matches!(e, Expr::Add(..)) { " + " } else { " - " })?;
                child(b, f, prec(b) <= 1)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                child(a, f, prec(a) < 2)?;
                write!(f, "{}", if matches!(e, Expr::Mul(..)) { "*" } else { "/" })?;
                child(b, f, prec(b) <= 2)
            }
        }
    }
}

// Binding strength of the node when printed bare.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(v) if *v < 0.0 => 5,
        Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}

/// An expression bundled with its variable names and all first partials.
#[derive(Debug, Clone)]
pub struct Function {
    names: Vec<String>,
    expr: Expr,
    grad: Vec<Expr>,
}

impl Function {
    pub fn parse(source: &str, variables: &[&str]) -> Result<Function, ParseError> {
        let expr = parse(source, variables)?;
        Ok(Function::new(expr, variables))
    }

    pub fn new(expr: Expr, variables: &[&str]) -> Function {
        let grad = (0..variables.len()).map(|i| expr.diff(i)).collect();
        Function {
            names: variables.iter().map(|s| s.to_string()).collect(),
            expr,
            grad,
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn partial(&self, var: usize) -> &Expr {
        &self.grad[var]
    }

    pub fn names(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.expr.eval(point)
    }

    pub fn gradient(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.grad.iter().map(|g| g.eval(point)).collect()
    }

    pub fn source(&self) -> String {
        let names = self.names();
        self.expr.display(&names).to_string()
    }
}
