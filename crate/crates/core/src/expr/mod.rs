//! Scalar expressions over indexed variables: parsing, printing, evaluation
//! and forward-mode (sub)differentiation.
//!
//! Variables are referenced by position in the caller's name list, so one
//! expression can be evaluated at any point whose length covers its largest
//! variable index.

mod parse;
mod tape;

use std::fmt;

use thiserror::Error;

pub use parse::parse_expression;
pub use tape::Compiled;

/// Default band separating true ties in `max` from round-off.
pub const DEFAULT_ACTIVE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("undeclared variable `{name}` at column {column}")]
    UndeclaredVariable { name: String, column: usize },
    #[error("non-integer exponent at column {column}")]
    NonIntegerExponent { column: usize },
    #[error("division by zero in `{node}`")]
    DivisionByZero { node: String },
    #[error("numeric overflow in `{node}`")]
    Overflow { node: String },
    #[error("point has {got} coordinates but the expression uses index {needed}")]
    Dimension { needed: usize, got: usize },
    #[error("empty active set in `{node}`")]
    EmptyActiveSet { node: String },
}

/// Expression tree. `min` is desugared to `-max(-a, -b, ...)` at parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    /// At least two children.
    Max(Vec<Expr>),
}

/// Clarke subgradient information at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientBundle {
    /// Indices of active `max` branches; `[0]` for expressions without a top-level `max`.
    pub active_indices: Vec<usize>,
    /// One gradient per active branch, never empty.
    pub generators: Vec<Vec<f64>>,
    /// Uniform average of `generators`.
    pub selection: Vec<f64>,
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl std::ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn max(children: Vec<Expr>) -> Self {
        assert!(children.len() >= 2, "max needs at least two children");
        Expr::Max(children)
    }

    pub fn pow(self, k: i32) -> Self {
        Expr::Pow(Box::new(self), k)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.max_var().max(b.max_var()),
            Expr::Max(cs) => cs.iter().filter_map(Expr::max_var).max(),
        }
    }

    /// True when some variable with index in `range` occurs.
    pub fn uses_any(&self, range: std::ops::Range<usize>) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(i) => range.contains(i),
            Expr::Neg(a) | Expr::Pow(a, _) => a.uses_any(range),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses_any(range.clone()) || b.uses_any(range)
            }
            Expr::Max(cs) => cs.iter().any(|c| c.uses_any(range.clone())),
        }
    }

    pub fn is_smooth(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_smooth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.is_smooth() && b.is_smooth(),
            Expr::Max(_) => false,
        }
    }

    /// Renders the expression in the input grammar with the given variable names.
    pub fn source<'a, S: AsRef<str>>(&'a self, names: &'a [S]) -> impl fmt::Display + 'a {
        Source { expr: self, names: Names::Given(names) }
    }

    pub fn compile(&self) -> Compiled {
        Compiled::new(self)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(_) | Expr::Var(_) | Expr::Max(_) => 5,
        }
    }
}

/// Prints with positional names `u1, u2, ...`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Source::<&str> { expr: self, names: Names::Positional }.fmt(f)
    }
}

enum Names<'a, S> {
    Given(&'a [S]),
    Positional,
}

struct Source<'a, S> {
    expr: &'a Expr,
    names: Names<'a, S>,
}

impl<S: AsRef<str>> Source<'_, S> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{})", -c)
            }
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => match &self.names {
                Names::Given(names) => match names.get(*i) {
                    Some(n) => f.write_str(n.as_ref()),
                    None => write!(f, "u{}", i + 1),
                },
                Names::Positional => write!(f, "u{}", i + 1),
            },
            Expr::Neg(a) => {
                f.write_str("-")?;
                if matches!(**a, Expr::Const(_)) {
                    f.write_str("(")?;
                    self.write(a, f)?;
                    f.write_str(")")
                } else {
                    self.child(a, 3, f)
                }
            }
            Expr::Add(a, b) => self.binary(a, " + ", b, 1, f),
            Expr::Sub(a, b) => self.binary(a, " - ", b, 1, f),
            Expr::Mul(a, b) => self.binary(a, "*", b, 2, f),
            Expr::Div(a, b) => self.binary(a, "/", b, 2, f),
            Expr::Pow(a, k) => {
                self.child(a, 5, f)?;
                write!(f, "^{k}")
            }
            Expr::Max(cs) => {
                f.write_str("max(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    self.write(c, f)?;
                }
                f.write_str(")")
            }
        }
    }

    fn binary(&self, a: &Expr, op: &str, b: &Expr, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.child(a, prec, f)?;
        f.write_str(op)?;
        self.child(b, prec + 1, f)
    }

    fn child(&self, e: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if e.precedence() < min_prec {
            f.write_str("(")?;
            self.write(e, f)?;
            f.write_str(")")
        } else {
            self.write(e, f)
        }
    }
}

impl<S: AsRef<str>> fmt::Display for Source<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}

/// Value of `expr` at `point`; `max` returns the largest child value.
pub fn evaluate(expr: &Expr, point: &[f64]) -> Result<f64, ExprError> {
    let v = match expr {
        Expr::Const(c) => *c,
        Expr::Var(i) => *point.get(*i).ok_or(ExprError::Dimension { needed: i + 1, got: point.len() })?,
        Expr::Neg(a) => -evaluate(a, point)?,
        Expr::Add(a, b) => evaluate(a, point)? + evaluate(b, point)?,
        Expr::Sub(a, b) => evaluate(a, point)? - evaluate(b, point)?,
        Expr::Mul(a, b) => evaluate(a, point)? * evaluate(b, point)?,
        Expr::Div(a, b) => {
            let num = evaluate(a, point)?;
            let den = evaluate(b, point)?;
            if den == 0.0 {
                return Err(ExprError::DivisionByZero { node: expr.to_string() });
            }
            num / den
        }
        Expr::Pow(a, k) => {
            let base = evaluate(a, point)?;
            if base == 0.0 && *k < 0 {
                return Err(ExprError::DivisionByZero { node: expr.to_string() });
            }
            int_pow(base, *k)
        }
        Expr::Max(cs) => {
            let mut best = f64::NEG_INFINITY;
            for c in cs {
                best = best.max(evaluate(c, point)?);
            }
            best
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::Overflow { node: expr.to_string() })
    }
}

/// Clarke subgradient bundle of `expr` at `point`.
///
/// For a top-level `max`, branches with value `>= max - active_tol` are
/// active; nested `max` nodes contribute the uniform average of their own
/// active branches.
pub fn clarke_subgradient(expr: &Expr, point: &[f64], active_tol: f64) -> Result<SubgradientBundle, ExprError> {
    expr.compile().bundle(point, active_tol)
}

/// `base^k` by repeated multiplication for `|k| <= 8`.
pub(crate) fn int_pow(base: f64, k: i32) -> f64 {
    let n = k.unsigned_abs();
    let p = if n <= 8 { (0..n).fold(1.0, |acc, _| acc * base) } else { base.powi(n as i32) };
    if k < 0 {
        1.0 / p
    } else {
        p
    }
}

/// Uniform average of equally sized vectors.
pub(crate) fn average(vectors: &[Vec<f64>]) -> Vec<f64> {
    let dim = vectors.first().map_or(0, Vec::len);
    let w = 1.0 / vectors.len() as f64;
    (0..dim).map(|k| vectors.iter().map(|g| g[k]).sum::<f64>() * w).collect()
}
