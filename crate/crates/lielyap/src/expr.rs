//! Closed-form scalar expressions with exact evaluation and symbolic partials.
//!
//! Expressions are finite trees over constants, variables `x1..xn`, the
//! arithmetic operators `+ - * / ^` (integer exponents only), and the unary
//! or binary functions `neg sin cos exp sqrt abs min max`. Differentiation
//! is exact and produces another expression tree; differentiating through
//! `abs`, `min` or `max` yields branch nodes that are only defined where the
//! active branch is strict. Evaluating such a node exactly at a tie raises
//! [`EvalError::Kink`] instead of guessing a subgradient.
//!
//! Evaluation is pure: identical inputs give bit-identical outputs, and all
//! trees are immutable after construction.

use std::fmt;
use thiserror::Error;

/// Error raised while evaluating an expression at a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    /// A derivative-context node (`sign`, branch of `min`/`max`) was evaluated
    /// exactly at its kink, where no classical derivative exists.
    #[error("kink evaluation: {0}")]
    Kink(String),
    /// Division by zero, overflow, or any other non-finite intermediate.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// A variable index exceeded the dimension of the supplied point.
    #[error("variable x{0} out of range for point of dimension {1}")]
    VarOutOfRange(usize, usize),
}

/// A scalar-valued expression tree.
///
/// Variables are 1-based in the surface syntax (`x1`, `x2`, ...) and stored
/// 0-based in [`ScalarExpr::Var`].
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Const(f64),
    Var(usize),
    Add(Box<ScalarExpr>, Box<ScalarExpr>),
    Sub(Box<ScalarExpr>, Box<ScalarExpr>),
    Mul(Box<ScalarExpr>, Box<ScalarExpr>),
    Div(Box<ScalarExpr>, Box<ScalarExpr>),
    /// Integer exponent only; general powers are out of scope.
    Pow(Box<ScalarExpr>, i32),
    Neg(Box<ScalarExpr>),
    Sin(Box<ScalarExpr>),
    Cos(Box<ScalarExpr>),
    Exp(Box<ScalarExpr>),
    Sqrt(Box<ScalarExpr>),
    Abs(Box<ScalarExpr>),
    Min(Box<ScalarExpr>, Box<ScalarExpr>),
    Max(Box<ScalarExpr>, Box<ScalarExpr>),
    /// `sign(u)`: arises only from differentiating `abs`; errors at `u = 0`.
    Signum(Box<ScalarExpr>),
    /// Branch on the strict ordering of `lhs` vs `rhs`: arises only from
    /// differentiating `min`/`max`; errors at a tie.
    Branch {
        lhs: Box<ScalarExpr>,
        rhs: Box<ScalarExpr>,
        if_lt: Box<ScalarExpr>,
        if_gt: Box<ScalarExpr>,
    },
}

use ScalarExpr::*;

// constructor names mirror the node names; the == 0.0 guards also cover -0.0
#[allow(clippy::should_implement_trait, clippy::redundant_guards)]
impl ScalarExpr {
    pub fn constant(c: f64) -> Self {
        Const(c)
    }

    /// Variable by 1-based index (`var(1)` is `x1`).
    pub fn var(i: usize) -> Self {
        assert!(i >= 1, "variables are 1-based");
        Var(i - 1)
    }

    pub fn add(a: ScalarExpr, b: ScalarExpr) -> Self {
        match (a, b) {
            (Const(x), Const(y)) => Const(x + y),
            (Const(z), b) if z == 0.0 => b,
            (a, Const(z)) if z == 0.0 => a,
            (a, b) => Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: ScalarExpr, b: ScalarExpr) -> Self {
        match (a, b) {
            (Const(x), Const(y)) => Const(x - y),
            (a, Const(z)) if z == 0.0 => a,
            (Const(z), b) if z == 0.0 => Self::neg(b),
            (a, b) if a == b => Const(0.0),
            (a, b) => Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: ScalarExpr, b: ScalarExpr) -> Self {
        match (a, b) {
            (Const(x), Const(y)) => Const(x * y),
            (Const(z), _) | (_, Const(z)) if z == 0.0 => Const(0.0),
            (Const(o), b) if o == 1.0 => b,
            (a, Const(o)) if o == 1.0 => a,
            (Const(m), b) if m == -1.0 => Self::neg(b),
            (a, Const(m)) if m == -1.0 => Self::neg(a),
            (a, b) => Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: ScalarExpr, b: ScalarExpr) -> Self {
        match (a, b) {
            (Const(z), b) if z == 0.0 && b != Const(0.0) => Const(0.0),
            (a, Const(o)) if o == 1.0 => a,
            (a, b) => Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: ScalarExpr, n: i32) -> Self {
        match (a, n) {
            (_, 0) => Const(1.0),
            (a, 1) => a,
            (Const(c), n) => Const(c.powi(n)),
            (a, n) => Pow(Box::new(a), n),
        }
    }

    pub fn neg(a: ScalarExpr) -> Self {
        match a {
            Const(c) => Const(-c),
            Neg(inner) => *inner,
            a => Neg(Box::new(a)),
        }
    }

    pub fn sin(a: ScalarExpr) -> Self {
        Sin(Box::new(a))
    }
    pub fn cos(a: ScalarExpr) -> Self {
        Cos(Box::new(a))
    }
    pub fn exp(a: ScalarExpr) -> Self {
        Exp(Box::new(a))
    }
    pub fn sqrt(a: ScalarExpr) -> Self {
        Sqrt(Box::new(a))
    }
    pub fn abs(a: ScalarExpr) -> Self {
        Abs(Box::new(a))
    }
    pub fn min(a: ScalarExpr, b: ScalarExpr) -> Self {
        Min(Box::new(a), Box::new(b))
    }
    pub fn max(a: ScalarExpr, b: ScalarExpr) -> Self {
        Max(Box::new(a), Box::new(b))
    }
    fn signum(a: ScalarExpr) -> Self {
        Signum(Box::new(a))
    }

    fn branch(lhs: ScalarExpr, rhs: ScalarExpr, if_lt: ScalarExpr, if_gt: ScalarExpr) -> Self {
        if if_lt == if_gt {
            return if_lt;
        }
        Branch {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            if_lt: Box::new(if_lt),
            if_gt: Box::new(if_gt),
        }
    }

    /// Evaluates the expression at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Const(c) => *c,
            Var(i) => {
                if *i >= x.len() {
                    return Err(EvalError::VarOutOfRange(i + 1, x.len()));
                }
                x[*i]
            }
            Add(a, b) => a.eval(x)? + b.eval(x)?,
            Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(EvalError::NonFinite("division by zero".into()));
                }
                a.eval(x)? / d
            }
            Pow(a, n) => a.eval(x)?.powi(*n),
            Neg(a) => -a.eval(x)?,
            Sin(a) => a.eval(x)?.sin(),
            Cos(a) => a.eval(x)?.cos(),
            Exp(a) => a.eval(x)?.exp(),
            Sqrt(a) => a.eval(x)?.sqrt(),
            Abs(a) => a.eval(x)?.abs(),
            Min(a, b) => a.eval(x)?.min(b.eval(x)?),
            Max(a, b) => a.eval(x)?.max(b.eval(x)?),
            Signum(a) => {
                let u = a.eval(x)?;
                if u == 0.0 {
                    return Err(EvalError::Kink("sign at zero".into()));
                }
                u.signum()
            }
            Branch {
                lhs,
                rhs,
                if_lt,
                if_gt,
            } => {
                let l = lhs.eval(x)?;
                let r = rhs.eval(x)?;
                if l < r {
                    if_lt.eval(x)?
                } else if l > r {
                    if_gt.eval(x)?
                } else {
                    return Err(EvalError::Kink("min/max arguments tie".into()));
                }
            }
        };
        if !v.is_finite() {
            return Err(EvalError::NonFinite(format!("{self}")));
        }
        Ok(v)
    }

    /// Exact symbolic partial with respect to `x_i` (1-based index).
    ///
    /// `abs(u)` differentiates to `sign(u)*u'`, valid only off the kink;
    /// `min`/`max` differentiate to a branch node on the strict comparison.
    pub fn partial(&self, i: usize) -> ScalarExpr {
        assert!(i >= 1, "variables are 1-based");
        let j = i - 1;
        match self {
            Const(_) => Const(0.0),
            Var(k) => Const(if *k == j { 1.0 } else { 0.0 }),
            Add(a, b) => Self::add(a.partial(i), b.partial(i)),
            Sub(a, b) => Self::sub(a.partial(i), b.partial(i)),
            Mul(a, b) => Self::add(
                Self::mul(a.partial(i), (**b).clone()),
                Self::mul((**a).clone(), b.partial(i)),
            ),
            Div(a, b) => Self::div(
                Self::sub(
                    Self::mul(a.partial(i), (**b).clone()),
                    Self::mul((**a).clone(), b.partial(i)),
                ),
                Self::pow((**b).clone(), 2),
            ),
            Pow(a, n) => Self::mul(
                Self::mul(Const(f64::from(*n)), Self::pow((**a).clone(), n - 1)),
                a.partial(i),
            ),
            Neg(a) => Self::neg(a.partial(i)),
            Sin(a) => Self::mul(Self::cos((**a).clone()), a.partial(i)),
            Cos(a) => Self::neg(Self::mul(Self::sin((**a).clone()), a.partial(i))),
            Exp(a) => Self::mul(Self::exp((**a).clone()), a.partial(i)),
            Sqrt(a) => Self::div(
                a.partial(i),
                Self::mul(Const(2.0), Self::sqrt((**a).clone())),
            ),
            Abs(a) => Self::mul(Self::signum((**a).clone()), a.partial(i)),
            Min(a, b) => Self::branch((**a).clone(), (**b).clone(), a.partial(i), b.partial(i)),
            Max(a, b) => Self::branch((**a).clone(), (**b).clone(), b.partial(i), a.partial(i)),
            // sign' and branch selections are locally constant off their kinks.
            Signum(_) => Const(0.0),
            Branch {
                lhs,
                rhs,
                if_lt,
                if_gt,
            } => Self::branch(
                (**lhs).clone(),
                (**rhs).clone(),
                if_lt.partial(i),
                if_gt.partial(i),
            ),
        }
    }

    /// Largest 1-based variable index referenced, or 0 for a constant tree.
    pub fn max_var(&self) -> usize {
        match self {
            Const(_) => 0,
            Var(i) => i + 1,
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Min(a, b) | Max(a, b) => {
                a.max_var().max(b.max_var())
            }
            Pow(a, _) | Neg(a) | Sin(a) | Cos(a) | Exp(a) | Sqrt(a) | Abs(a) | Signum(a) => {
                a.max_var()
            }
            Branch {
                lhs,
                rhs,
                if_lt,
                if_gt,
            } => lhs
                .max_var()
                .max(rhs.max_var())
                .max(if_lt.max_var())
                .max(if_gt.max_var()),
        }
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const(c) => write!(f, "{c}"),
            Var(i) => write!(f, "x{}", i + 1),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, n) => write!(f, "{a}^{n}"),
            Neg(a) => write!(f, "(-{a})"),
            Sin(a) => write!(f, "sin({a})"),
            Cos(a) => write!(f, "cos({a})"),
            Exp(a) => write!(f, "exp({a})"),
            Sqrt(a) => write!(f, "sqrt({a})"),
            Abs(a) => write!(f, "abs({a})"),
            Min(a, b) => write!(f, "min({a}, {b})"),
            Max(a, b) => write!(f, "max({a}, {b})"),
            Signum(a) => write!(f, "sign({a})"),
            Branch {
                lhs,
                rhs,
                if_lt,
                if_gt,
            } => write!(f, "[{lhs}<{rhs} ? {if_lt} : {if_gt}]"),
        }
    }
}

/// Error produced while parsing the infix grammar, with a byte column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at column {col}: {msg}")]
pub struct ParseError {
    pub col: usize,
    pub msg: String,
}

/// Parses the plain infix grammar.
///
/// Variables are `x1..xn` (checked against `dim`), functions are
/// `sin cos exp sqrt abs min max`, operators are `+ - * / ^` with `^`
/// restricted to integer exponents; `min` and `max` take two arguments.
///
/// ```
/// use lielyap::expr::parse_expr;
/// let e = parse_expr("x1^2 + abs(x2) * min(1, x3)", 3).unwrap();
/// assert_eq!(e.eval(&[2.0, -3.0, 0.5]).unwrap(), 4.0 + 3.0 * 0.5);
/// ```
pub fn parse_expr(src: &str, dim: usize) -> Result<ScalarExpr, ParseError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        dim,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ParseError {
        ParseError {
            col: self.pos + 1,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), ParseError> {
        if self.eat(b) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", b as char)))
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = ScalarExpr::add(acc, self.term()?);
            } else if self.eat(b'-') {
                acc = ScalarExpr::sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    // term := unary (('*'|'/') unary)*
    fn term(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = ScalarExpr::mul(acc, self.unary()?);
            } else if self.eat(b'/') {
                acc = ScalarExpr::div(acc, self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<ScalarExpr, ParseError> {
        if self.eat(b'-') {
            Ok(ScalarExpr::neg(self.unary()?))
        } else {
            self.power()
        }
    }

    // power := atom ('^' int)?
    fn power(&mut self) -> Result<ScalarExpr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let n = self.integer()?;
            Ok(ScalarExpr::pow(base, n))
        } else {
            Ok(base)
        }
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let paren = self.eat(b'(');
        self.skip_ws();
        let neg = self.eat(b'-');
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut n: i32 = digits
            .parse()
            .map_err(|_| self.err("exponent out of range"))?;
        if neg {
            n = -n;
        }
        if paren {
            self.expect(b')')?;
        }
        Ok(n)
    }

    fn atom(&mut self) -> Result<ScalarExpr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected expression")),
        }
    }

    fn number(&mut self) -> Result<ScalarExpr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // scientific suffix: 1.5e-3
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Const)
            .map_err(|_| self.err(&format!("invalid number '{text}'")))
    }

    fn ident(&mut self) -> Result<ScalarExpr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(i) = rest.parse::<usize>() {
                if i == 0 || i > self.dim {
                    self.pos = start;
                    return Err(self.err(&format!(
                        "variable x{i} out of range for dimension {}",
                        self.dim
                    )));
                }
                return Ok(ScalarExpr::var(i));
            }
        }
        let one = |p: &mut Self, f: fn(ScalarExpr) -> ScalarExpr| -> Result<ScalarExpr, ParseError> {
            p.expect(b'(')?;
            let a = p.expr()?;
            p.expect(b')')?;
            Ok(f(a))
        };
        let two = |p: &mut Self,
                   f: fn(ScalarExpr, ScalarExpr) -> ScalarExpr|
         -> Result<ScalarExpr, ParseError> {
            p.expect(b'(')?;
            let a = p.expr()?;
            p.expect(b',')?;
            let b = p.expr()?;
            p.expect(b')')?;
            Ok(f(a, b))
        };
        match name {
            "sin" => one(self, ScalarExpr::sin),
            "cos" => one(self, ScalarExpr::cos),
            "exp" => one(self, ScalarExpr::exp),
            "sqrt" => one(self, ScalarExpr::sqrt),
            "abs" => one(self, ScalarExpr::abs),
            "min" => two(self, ScalarExpr::min),
            "max" => two(self, ScalarExpr::max),
            "pi" => Ok(Const(std::f64::consts::PI)),
            _ => {
                self.pos = start;
                Err(self.err(&format!("unknown function or variable '{name}'")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str, dim: usize) -> ScalarExpr {
        parse_expr(src, dim).unwrap()
    }

    #[test]
    fn parses_and_evaluates_basic_arithmetic() {
        let e = p("2 + 3*x1 - x2/2", 2);
        assert_eq!(e.eval(&[4.0, 6.0]).unwrap(), 2.0 + 12.0 - 3.0);
    }

    #[test]
    fn integer_powers_only() {
        assert_eq!(p("x1^3", 1).eval(&[2.0]).unwrap(), 8.0);
        assert_eq!(p("x1^(-2)", 1).eval(&[2.0]).unwrap(), 0.25);
        assert!(parse_expr("x1^x2", 2).is_err());
        assert!(parse_expr("x1^2.5", 1).is_err());
    }

    #[test]
    fn variables_checked_against_dimension() {
        assert!(parse_expr("x3", 2).is_err());
        assert!(parse_expr("x0", 2).is_err());
        assert!(parse_expr("y1", 2).is_err());
    }

    #[test]
    fn partial_of_product_is_factor() {
        // d/dx1 of x1*x2 = x2
        let e = p("x1*x2", 2);
        assert_eq!(e.partial(1), ScalarExpr::var(2));
    }

    #[test]
    fn partial_of_unrelated_variable_is_zero() {
        // d/dx3 of x2^2 = 0
        let e = p("x2^2", 3);
        assert_eq!(e.partial(3), Const(0.0));
    }

    #[test]
    fn abs_partial_uses_sign_off_kink() {
        // d/dx2 of (|x2| - 2 x2) at x2 = 1 evaluates to sign(1) - 2 = -1
        let e = p("abs(x2) - 2*x2", 2);
        let d = e.partial(2);
        assert_eq!(d.eval(&[0.0, 1.0]).unwrap(), -1.0);
        assert_eq!(d.eval(&[0.0, -1.0]).unwrap(), -3.0);
        assert!(matches!(d.eval(&[0.0, 0.0]), Err(EvalError::Kink(_))));
    }

    #[test]
    fn min_max_partials_branch_on_strict_ordering() {
        let e = p("min(x1, x2^2)", 2);
        let d1 = e.partial(1);
        assert_eq!(d1.eval(&[1.0, 2.0]).unwrap(), 1.0); // x1 < x2^2 active
        assert_eq!(d1.eval(&[5.0, 2.0]).unwrap(), 0.0); // x2^2 active
        assert!(matches!(d1.eval(&[4.0, 2.0]), Err(EvalError::Kink(_))));

        let m = p("max(x1, x2)", 2);
        let d = m.partial(1);
        assert_eq!(d.eval(&[3.0, 1.0]).unwrap(), 1.0);
        assert_eq!(d.eval(&[1.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = p("1/x1", 1);
        assert!(matches!(e.eval(&[0.0]), Err(EvalError::NonFinite(_))));
    }

    #[test]
    fn plain_abs_is_fine_at_zero() {
        // only derivative contexts raise kink errors
        let e = p("abs(x1)", 1);
        assert_eq!(e.eval(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let e = p("sin(x1)*exp(x2) - sqrt(x1^2 + 1) / max(x2, 0.5)", 2);
        let a = e.eval(&[0.3, 0.7]).unwrap();
        let b = e.eval(&[0.3, 0.7]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    /// Central-difference oracle used to cross-check symbolic partials.
    fn central_diff(e: &ScalarExpr, x: &[f64], i: usize, h: f64) -> f64 {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i - 1] += h;
        xm[i - 1] -= h;
        (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h)
    }

    #[test]
    fn every_node_type_matches_central_differences() {
        // one expression per node type, probed at kink-free points
        let exprs = [
            "x1 + x2",
            "x1 - 2*x2",
            "x1*x2",
            "x1/x2",
            "x1^3",
            "-x1",
            "sin(x1*x2)",
            "cos(x1 - x2)",
            "exp(x1/2)",
            "sqrt(x1^2 + x2^2 + 1)",
            "abs(x1 - 0.1)",
            "min(x1, 2*x2)",
            "max(x1^2, x2)",
        ];
        // deterministic low-discrepancy-ish probe points
        let mut pts = Vec::new();
        for k in 0..100u32 {
            let a = 0.17 + 0.613 * f64::from(k % 13);
            let b = -1.3 + 0.377 * f64::from(k % 17);
            pts.push([a, b]);
        }
        for src in exprs {
            let e = p(src, 2);
            for i in 1..=2 {
                let d = e.partial(i);
                for x in &pts {
                    let sym = match d.eval(x) {
                        Ok(v) => v,
                        Err(EvalError::Kink(_)) => continue,
                        Err(other) => panic!("{other}"),
                    };
                    let num = central_diff(&e, x, i, 1e-5);
                    let scale = sym.abs().max(1.0);
                    assert!(
                        (sym - num).abs() <= 1e-6 * scale,
                        "{src} d/dx{i} at {x:?}: {sym} vs {num}"
                    );
                }
            }
        }
    }
}
