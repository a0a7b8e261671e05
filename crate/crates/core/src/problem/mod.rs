//! Bilevel problem instances: the upper objective `h(x, y)`, lower
//! objectives `f_1..f_p` over `x`, coupling constraints `g(x, y) <= 0` and the
//! lower feasible set `X = {x | s(x) <= 0}`.
//!
//! The joint point is `u = (x_1..x_n, y_1..y_m)`; every expression indexes
//! into it, so x-only functions also accept a plain `x`.

mod file;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::expr::{Compiled, Expr, ExprError, SubgradientBundle};
use crate::neurodynamic::{self, FlowConfig, FlowError, FlowStatus, Oracle};

pub use file::{load_problem, parse_problem};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: {source}")]
    Expr { line: usize, source: ExprError },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// A compiled expression usable as a flow oracle.
#[derive(Debug, Clone)]
pub struct Function {
    expr: Expr,
    tape: Compiled,
}

impl Function {
    pub fn new(expr: Expr) -> Self {
        let tape = expr.compile();
        Function { expr, tape }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64, ExprError> {
        self.tape.value(u)
    }
}

impl Oracle for Function {
    fn value(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.tape.value(x)
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ExprError> {
        Oracle::value_grad(&self.tape, x)
    }

    fn value_bundle(&self, x: &[f64], active_tol: f64) -> Result<(f64, SubgradientBundle), ExprError> {
        self.tape.value_bundle(x, active_tol)
    }
}

/// Where a constraint row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSource {
    /// The k-th `constraint_x` line.
    Lower(usize),
    /// Lower bound on variable `var` of the joint point.
    LowerBound(usize),
    UpperBound(usize),
    /// `-y_j <= 0`.
    Nonnegative(usize),
    /// `f_i(x) - z_i <= 0`.
    Outcome(usize),
    /// The j-th `constraint_xy` line.
    Coupling(usize),
}

/// A row `func(u) <= 0` tagged with its origin.
#[derive(Debug, Clone)]
pub struct Row {
    pub source: RowSource,
    pub func: Function,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    /// Index into the joint point.
    pub var: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Reference solution carried by a problem file for test harnesses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnownOptimum {
    pub h: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct BilevelProblem {
    n: usize,
    m: usize,
    names: Vec<String>,
    upper: Function,
    lower: Vec<Function>,
    declared_x: usize,
    x_rows: Vec<Row>,
    g_rows: Vec<Row>,
    bounds: Vec<Bound>,
    known: Option<KnownOptimum>,
}

impl BilevelProblem {
    /// Variable names `x1..xn, y1..ym` in joint-point order.
    pub fn variable_names(n: usize, m: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).chain((1..=m).map(|j| format!("y{j}"))).collect()
    }

    /// Assembles a problem; bounds on x become extra rows of `X`, bounds on y extra coupling rows.
    pub fn new(
        n: usize,
        m: usize,
        upper: Expr,
        lower: Vec<Expr>,
        constraints_x: Vec<Expr>,
        constraints_xy: Vec<Expr>,
        bounds: Vec<Bound>,
    ) -> Result<Self, ProblemError> {
        let joint = n + m;
        let all = std::iter::once(&upper).chain(&lower).chain(&constraints_x).chain(&constraints_xy);
        if let Some(i) = all.filter_map(Expr::max_var).max().filter(|i| *i >= joint) {
            return Err(ProblemError::Dimension(format!("variable index {} exceeds n + m = {joint}", i + 1)));
        }
        if let Some(b) = bounds.iter().find(|b| b.var >= joint || b.lo > b.hi || b.lo.is_nan() || b.hi.is_nan()) {
            return Err(ProblemError::Dimension(format!("bad bound on variable index {}", b.var + 1)));
        }
        let declared_x = constraints_x.len();
        let mut x_rows: Vec<Row> = constraints_x
            .into_iter()
            .enumerate()
            .map(|(k, e)| Row { source: RowSource::Lower(k), func: Function::new(e) })
            .collect();
        let mut g_rows: Vec<Row> = constraints_xy
            .into_iter()
            .enumerate()
            .map(|(k, e)| Row { source: RowSource::Coupling(k), func: Function::new(e) })
            .collect();
        for b in &bounds {
            let target = if b.var < n { &mut x_rows } else { &mut g_rows };
            if b.lo.is_finite() {
                let e = Expr::constant(b.lo) - Expr::var(b.var);
                target.push(Row { source: RowSource::LowerBound(b.var), func: Function::new(e) });
            }
            if b.hi.is_finite() {
                let e = Expr::var(b.var) - Expr::constant(b.hi);
                target.push(Row { source: RowSource::UpperBound(b.var), func: Function::new(e) });
            }
        }
        Ok(BilevelProblem {
            n,
            m,
            names: Self::variable_names(n, m),
            upper: Function::new(upper),
            lower: lower.into_iter().map(Function::new).collect(),
            declared_x,
            x_rows,
            g_rows,
            bounds,
            known: None,
        })
    }

    pub fn with_known(mut self, known: KnownOptimum) -> Self {
        self.known = Some(known);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.lower.len()
    }

    /// Number of rows defining `X`, bounds included.
    pub fn q(&self) -> usize {
        self.x_rows.len()
    }

    /// Number of coupling rows, y-bounds included.
    pub fn l(&self) -> usize {
        self.g_rows.len()
    }

    /// Number of `constraint_x` lines, bounds excluded.
    pub fn declared_constraints(&self) -> usize {
        self.declared_x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn upper(&self) -> &Function {
        &self.upper
    }

    pub fn lower(&self) -> &[Function] {
        &self.lower
    }

    pub fn x_rows(&self) -> &[Row] {
        &self.x_rows
    }

    pub fn g_rows(&self) -> &[Row] {
        &self.g_rows
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn known(&self) -> Option<&KnownOptimum> {
        self.known.as_ref()
    }

    /// Rows of `X` as flow oracles.
    pub fn x_oracles(&self) -> Vec<&dyn Oracle> {
        oracles(&self.x_rows)
    }

    pub fn joint(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter().chain(y).copied().collect()
    }

    /// `f(x)`.
    pub fn outcome(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.lower.iter().map(|f| f.eval(x)).collect()
    }

    pub fn upper_value(&self, x: &[f64], y: &[f64]) -> Result<f64, ExprError> {
        self.upper.eval(&self.joint(x, y))
    }

    /// Largest row value of `X` at `x` (`-inf` when `X` has no rows).
    pub fn x_violation(&self, x: &[f64]) -> Result<f64, ExprError> {
        max_row(&self.x_rows, x)
    }

    /// The stack `(s, -y, f - z, g)` over `u = (x, y)` defining `MP(z)`.
    pub fn stacked_mp_constraints(&self, z: &[f64]) -> Result<Vec<Row>, ProblemError> {
        if z.len() != self.p() {
            return Err(ProblemError::Dimension(format!("outcome vector has length {} but p = {}", z.len(), self.p())));
        }
        let mut rows = self.x_rows.clone();
        rows.extend(
            (0..self.m).map(|j| Row { source: RowSource::Nonnegative(j), func: Function::new(-Expr::var(self.n + j)) }),
        );
        rows.extend(self.lower.iter().zip(z).enumerate().map(|(i, (f, zi))| Row {
            source: RowSource::Outcome(i),
            func: Function::new(f.expr().clone() - Expr::constant(*zi)),
        }));
        rows.extend(self.g_rows.iter().cloned());
        Ok(rows)
    }

    pub fn region(&self) -> FeasibleRegion<'_> {
        let mut rows = self.x_rows.clone();
        rows.extend(
            (0..self.m).map(|j| Row { source: RowSource::Nonnegative(j), func: Function::new(-Expr::var(self.n + j)) }),
        );
        rows.extend(self.g_rows.iter().cloned());
        FeasibleRegion { problem: self, rows }
    }

    /// A deterministic point inside the bound box (origin where unbounded).
    pub fn start_point(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.n + self.m];
        for b in &self.bounds {
            u[b.var] = match (b.lo.is_finite(), b.hi.is_finite()) {
                (true, true) => 0.5 * (b.lo + b.hi),
                (true, false) => b.lo.max(u[b.var]),
                (false, true) => b.hi.min(u[b.var]),
                (false, false) => u[b.var],
            };
        }
        u
    }

    /// Renders the problem in the file format accepted by [`parse_problem`].
    pub fn to_source(&self) -> String {
        let mut out = format!("vars x {}\n", self.n);
        if self.m > 0 {
            out += &format!("vars y {}\n", self.m);
        }
        out += &format!("upper {}\n", self.upper.expr().source(&self.names));
        for f in &self.lower {
            out += &format!("lower {}\n", f.expr().source(&self.names));
        }
        for r in self.x_rows.iter().filter(|r| matches!(r.source, RowSource::Lower(_))) {
            out += &format!("constraint_x {}\n", r.func.expr().source(&self.names));
        }
        for r in self.g_rows.iter().filter(|r| matches!(r.source, RowSource::Coupling(_))) {
            out += &format!("constraint_xy {}\n", r.func.expr().source(&self.names));
        }
        for b in &self.bounds {
            out += &format!("bound {} {} {}\n", self.names[b.var], b.lo, b.hi);
        }
        out
    }
}

/// `G = {(x, y) | x ∈ X, y >= 0, g(x, y) <= 0}`.
pub struct FeasibleRegion<'a> {
    problem: &'a BilevelProblem,
    rows: Vec<Row>,
}

impl FeasibleRegion<'_> {
    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Largest stacked row value at `(x, y)`.
    pub fn max_violation(&self, x: &[f64], y: &[f64]) -> Result<f64, ExprError> {
        max_row(&self.rows, &self.problem.joint(x, y))
    }

    pub fn contains(&self, x: &[f64], y: &[f64], tol: f64) -> Result<bool, ExprError> {
        Ok(self.max_violation(x, y)? <= tol)
    }
}

fn max_row(rows: &[Row], u: &[f64]) -> Result<f64, ExprError> {
    rows.iter().try_fold(f64::NEG_INFINITY, |acc, r| Ok(acc.max(r.func.eval(u)?)))
}

pub fn oracles(rows: &[Row]) -> Vec<&dyn Oracle> {
    rows.iter().map(|r| &r.func as &dyn Oracle).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Info,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Info => "info",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Radius past which a coordinate probe declares `X` unbounded.
pub const BOUNDEDNESS_RADIUS: f64 = 1e6;

/// Structural checks plus a boundedness probe of `X`.
///
/// Structural violations are errors; everything else is reported as a diagnostic.
pub fn validate(problem: &BilevelProblem) -> Result<Vec<Diagnostic>, ProblemError> {
    if problem.p() < 2 {
        return Err(ProblemError::Invalid("lower level must be vectorial (p ≥ 2)".into()));
    }
    if problem.n == 0 {
        return Err(ProblemError::Invalid("at least one x variable is required".into()));
    }
    let y_range = problem.n..problem.n + problem.m;
    if let Some(i) = problem.lower.iter().position(|f| f.expr().uses_any(y_range.clone())) {
        return Err(ProblemError::Invalid(format!("lower objective f{} depends on y", i + 1)));
    }
    if let Some(r) = problem.x_rows.iter().find(|r| r.func.expr().uses_any(y_range.clone())) {
        return Err(ProblemError::Invalid(format!("constraint {:?} of X depends on y", r.source)));
    }

    let mut out = vec![Diagnostic {
        severity: Severity::Warning,
        message: "assumed without checking: h and every f_i pseudoconvex, every s_k and g_j \
                  quasiconvex (sufficient conditions: ratios of convex over positive concave \
                  or affine functions)"
            .into(),
    }];
    if problem.m == 0 {
        out.push(info("no y variables: MP(z) minimises over x only"));
    }
    if problem.g_rows.is_empty() {
        out.push(info("no coupling constraints"));
    }
    if problem.x_rows.is_empty() {
        out.push(Diagnostic { severity: Severity::Warning, message: "X has no constraints".into() });
    }

    let probe = FlowConfig { t_max: 1e12, divergence_radius: BOUNDEDNESS_RADIUS, ..FlowConfig::default() };
    let rows = problem.x_oracles();
    let start = &problem.start_point()[..problem.n];
    let x0 = match neurodynamic::find_feasible(&rows, start, &probe) {
        Ok(x) => x,
        Err(FlowError::Expr(e)) => return Err(ProblemError::Invalid(e.to_string())),
        Err(_) => {
            out.push(Diagnostic { severity: Severity::Warning, message: "X appears to be empty".into() });
            return Ok(out);
        }
    };
    for k in 0..problem.n {
        for sign in [1.0, -1.0] {
            let obj = Function::new(if sign > 0.0 { Expr::var(k) } else { -Expr::var(k) });
            let r =
                neurodynamic::solve_flow(&obj, &rows, &x0, &probe).map_err(|e| ProblemError::Invalid(e.to_string()))?;
            if r.status == FlowStatus::Diverged {
                let dir = if sign > 0.0 { "below" } else { "above" };
                out.push(Diagnostic {
                    severity: Severity::Warning,
                    message: format!("X appears unbounded: x{} is not bounded {dir}", k + 1),
                });
            }
        }
    }
    Ok(out)
}

fn info(message: &str) -> Diagnostic {
    Diagnostic { severity: Severity::Info, message: message.into() }
}

#[cfg(test)]
mod tests;
