//! Minimal closed-form expression grammar for metric components and
//! scenario potentials.
//!
//! Supported: float literals, named variables, `+ - * / ^`, parentheses,
//! and the functions `exp`, `tanh`, `sin`, `cos`. Exponents must fold to
//! constants so that symbolic differentiation stays inside the grammar.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Unary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Tanh,
    Sin,
    Cos,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp" => Some(Func::Exp),
            "tanh" => Some(Func::Tanh),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            _ => None,
        }
    }

    fn apply<R: Real>(self, v: R) -> R {
        match self {
            Func::Exp => v.exp(),
            Func::Tanh => v.tanh(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
        }
    }
}

/// A parsed expression tree. Variables are stored as indices into the
/// name list supplied to [`Expr::parse`], so evaluation binds values
/// positionally.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Base raised to a constant exponent.
    Pow(Box<Expr>, f64),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
}

fn add(a: Expr, b: Expr) -> Expr {
    Expr::Add(Box::new(a), Box::new(b))
}

fn sub(a: Expr, b: Expr) -> Expr {
    Expr::Sub(Box::new(a), Box::new(b))
}

fn mul(a: Expr, b: Expr) -> Expr {
    Expr::Mul(Box::new(a), Box::new(b))
}

impl Expr {
    /// Parses `src` with the given variable names. Unknown identifiers and
    /// trailing input are configuration errors, so malformed component
    /// strings fail at construction rather than mid-integration.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        let mut p = Parser { src, bytes: src.as_bytes(), pos: 0, vars };
        let e = p.additive()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(Error::Config(format!(
                "unexpected input {:?} at byte {} of expression {src:?}",
                &src[p.pos..],
                p.pos
            )));
        }
        Ok(e.fold())
    }

    /// Evaluates with `values[i]` bound to the i-th parse variable.
    pub fn eval<R: Real>(&self, values: &[R]) -> Result<R> {
        let v = match self {
            Expr::Num(n) => R::of(*n),
            Expr::Var(i) => *values.get(*i).ok_or_else(|| {
                Error::Config(format!("expression variable #{i} has no bound value"))
            })?,
            Expr::Add(a, b) => a.eval(values)? + b.eval(values)?,
            Expr::Sub(a, b) => a.eval(values)? - b.eval(values)?,
            Expr::Mul(a, b) => a.eval(values)? * b.eval(values)?,
            Expr::Div(a, b) => {
                let d = b.eval(values)?;
                if d == R::zero() {
                    return Err(Error::Numerical("division by zero in expression".into()));
                }
                a.eval(values)? / d
            }
            Expr::Pow(a, n) => pow_const(a.eval(values)?, *n)?,
            Expr::Neg(a) => -a.eval(values)?,
            Expr::Call(f, a) => f.apply(a.eval(values)?),
        };
        if !v.is_finite() {
            return Err(Error::Numerical("expression evaluated to a non-finite value".into()));
        }
        Ok(v)
    }

    /// Symbolic derivative with respect to parse variable `var`,
    /// constant-folded.
    pub fn derivative(&self, var: usize) -> Expr {
        let d = match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(i) => Expr::Num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Expr::Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Expr::Div(a, b) => {
                let num = sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                );
                Expr::Div(Box::new(num), Box::new(Expr::Pow(b.clone(), 2.0)))
            }
            Expr::Pow(a, n) => mul(
                Expr::Num(*n),
                mul(Expr::Pow(a.clone(), n - 1.0), a.derivative(var)),
            ),
            Expr::Neg(a) => Expr::Neg(Box::new(a.derivative(var))),
            Expr::Call(Func::Exp, a) => mul(Expr::Call(Func::Exp, a.clone()), a.derivative(var)),
            Expr::Call(Func::Tanh, a) => mul(
                sub(Expr::Num(1.0), Expr::Pow(Box::new(Expr::Call(Func::Tanh, a.clone())), 2.0)),
                a.derivative(var),
            ),
            Expr::Call(Func::Sin, a) => mul(Expr::Call(Func::Cos, a.clone()), a.derivative(var)),
            Expr::Call(Func::Cos, a) => {
                Expr::Neg(Box::new(mul(Expr::Call(Func::Sin, a.clone()), a.derivative(var))))
            }
        };
        d.fold()
    }

    /// Light constant folding: collapses numeric subtrees and the identity
    /// elements introduced by differentiation.
    fn fold(self) -> Expr {
        match self {
            Expr::Add(a, b) => match ((*a).fold(), (*b).fold()) {
                (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
                (Expr::Num(z), e) | (e, Expr::Num(z)) if z == 0.0 => e,
                (a, b) => add(a, b),
            },
            Expr::Sub(a, b) => match ((*a).fold(), (*b).fold()) {
                (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
                (e, Expr::Num(z)) if z == 0.0 => e,
                (Expr::Num(z), e) if z == 0.0 => Expr::Neg(Box::new(e)).fold(),
                (a, b) => sub(a, b),
            },
            Expr::Mul(a, b) => match ((*a).fold(), (*b).fold()) {
                (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
                (Expr::Num(z), _) | (_, Expr::Num(z)) if z == 0.0 => Expr::Num(0.0),
                (Expr::Num(o), e) | (e, Expr::Num(o)) if o == 1.0 => e,
                (a, b) => mul(a, b),
            },
            Expr::Div(a, b) => match ((*a).fold(), (*b).fold()) {
                (Expr::Num(x), Expr::Num(y)) if y != 0.0 => Expr::Num(x / y),
                (e, Expr::Num(o)) if o == 1.0 => e,
                (a, b) => Expr::Div(Box::new(a), Box::new(b)),
            },
            Expr::Pow(a, n) => {
                let base = (*a).fold();
                if n == 0.0 {
                    Expr::Num(1.0)
                } else if n == 1.0 {
                    base
                } else if let Expr::Num(x) = base {
                    match pow_const(x, n) {
                        Ok(v) => Expr::Num(v),
                        Err(_) => Expr::Pow(Box::new(Expr::Num(x)), n),
                    }
                } else {
                    Expr::Pow(Box::new(base), n)
                }
            }
            Expr::Neg(a) => match (*a).fold() {
                Expr::Num(x) => Expr::Num(-x),
                Expr::Neg(inner) => *inner,
                e => Expr::Neg(Box::new(e)),
            },
            Expr::Call(f, a) => match (*a).fold() {
                Expr::Num(x) => Expr::Num(f.apply(x)),
                e => Expr::Call(f, Box::new(e)),
            },
            leaf => leaf,
        }
    }
}

/// Power with a constant exponent; integer exponents use `powi` so that
/// negative bases stay exact.
fn pow_const<R: Real>(base: R, n: f64) -> Result<R> {
    let v = if n.fract() == 0.0 && n.abs() <= i32::MAX as f64 {
        base.powi(n as i32)
    } else {
        if base < R::zero() {
            return Err(Error::Numerical(format!(
                "fractional power {n} of negative base {base}"
            )));
        }
        base.powf(R::of(n))
    };
    if !v.is_finite() {
        return Err(Error::Numerical(format!("power {base}^{n} is not finite")));
    }
    Ok(v)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn additive(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    e = add(e, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    e = sub(e, self.term()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    e = mul(e, self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    e = Expr::Div(Box::new(e), Box::new(self.unary()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // The exponent may be any constant subexpression (it is parsed
            // at unary precedence, so `x^-2` and `x^(1+1)` work); anything
            // that does not fold to a number cannot be differentiated
            // symbolically and is rejected.
            let expo = self.unary()?.fold();
            match expo {
                Expr::Num(n) => Ok(Expr::Pow(Box::new(base), n)),
                _ => Err(Error::Config(format!(
                    "exponent must be a constant in expression {:?}",
                    self.src
                ))),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.additive()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Config(format!(
                        "missing closing parenthesis in expression {:?}",
                        self.src
                    )));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            other => Err(Error::Config(format!(
                "expected a value at byte {} of expression {:?}, found {:?}",
                self.pos,
                self.src,
                other.map(|b| b as char)
            ))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // Exponent suffix: e or E, optional sign, at least one digit.
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
            let mut probe = self.pos + 1;
            if probe < self.bytes.len() && matches!(self.bytes[probe], b'+' | b'-') {
                probe += 1;
            }
            if probe < self.bytes.len() && self.bytes[probe].is_ascii_digit() {
                self.pos = probe;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| {
                Error::Config(format!(
                    "malformed number {:?} in expression {:?}",
                    &self.src[start..self.pos],
                    self.src
                ))
            })
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if self.peek() == Some(b'(') {
            let f = Func::from_name(name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown function {name:?} in expression {:?} (supported: exp, tanh, sin, cos)",
                    self.src
                ))
            })?;
            self.pos += 1;
            let arg = self.additive()?;
            if self.peek() != Some(b')') {
                return Err(Error::Config(format!(
                    "missing closing parenthesis after {name}(...) in expression {:?}",
                    self.src
                )));
            }
            self.pos += 1;
            Ok(Expr::Call(f, Box::new(arg)))
        } else {
            let idx = self.vars.iter().position(|v| *v == name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown variable {name:?} in expression {:?} (allowed: {})",
                    self.src,
                    self.vars.join(", ")
                ))
            })?;
            Ok(Expr::Var(idx))
        }
    }
}
