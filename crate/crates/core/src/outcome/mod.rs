//! Outcome-space scaffolding: the box `[m, M]` around `Z = f(X)`, the ray
//! scalarization that projects a point onto the weakly nondominated frontier,
//! and the value function `φ(z) = min{h(x, y) | (x, y) ∈ G, f(x) <= z}`.

use dashmap::DashMap;
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::neurodynamic::{self, FlowConfig, FlowError, FlowResult, FlowStatus, Oracle};
use crate::problem::{oracles, BilevelProblem, Function, ProblemError};

/// Feasibility stalls above this penalty mean `MP(z)` has no solution.
pub const MP_INFEASIBLE_PENALTY: f64 = 1e-6;

/// Cache keys round each coordinate to this resolution.
pub const CACHE_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OutcomeError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("{what}: flow diverged, X or the objective appears unbounded")]
    Unbounded { what: String },
    #[error("{what}: no feasible starting point in X")]
    EmptyX { what: String },
    #[error("direction must be positive with length {expected}, got {got:?}")]
    BadDirection { expected: usize, got: Vec<f64> },
    #[error("outcome vector has length {got} but p = {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Which upper corner seeds the vertex set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CornerRule {
    /// Payoff nadir when `p = 2`, simplex corner otherwise.
    ///
    /// For `p >= 3` a payoff table may underestimate the nadir, so `Payoff` can then cut off efficient outcomes.
    #[default]
    Auto,
    Simplex,
    Payoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeBox {
    /// Componentwise minima `m_i = min f_i` over `X`.
    pub lower: Vec<f64>,
    /// Simplex corner `M_i = max_j f_i(Δ^j)`.
    pub upper: Vec<f64>,
    /// Payoff-table nadir `max_j f_i(x^j)` over the minimizers `x^j` of `f_j`,
    /// lexicographic (hence exact) when `p = 2`.
    pub nadir: Vec<f64>,
    /// `Δ^0..Δ^n`, a simplex containing `X`.
    pub simplex_vertices: Vec<Vec<f64>>,
    /// `U = max Σ x_k` over `X`.
    pub u_max: f64,
    /// Minimizer of each `f_i` over `X`.
    pub minimizers: Vec<Vec<f64>>,
}

impl OutcomeBox {
    pub fn p(&self) -> usize {
        self.lower.len()
    }

    pub fn corner(&self, rule: CornerRule) -> &[f64] {
        match rule {
            CornerRule::Simplex => &self.upper,
            CornerRule::Payoff => &self.nadir,
            CornerRule::Auto if self.p() == 2 => &self.nadir,
            CornerRule::Auto => &self.upper,
        }
    }

    /// `M - (M_i - m_i) e^i`.
    pub fn initializer(&self, i: usize) -> Vec<f64> {
        let mut z = self.upper.clone();
        z[i] = self.lower[i];
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaySolution {
    pub v: Vec<f64>,
    pub t: f64,
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpSolution {
    pub z: Vec<f64>,
    /// `+inf` when infeasible.
    pub phi: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub feasible: bool,
}

fn flow_ok(result: FlowResult, what: impl Fn() -> String) -> Result<FlowResult, OutcomeError> {
    match result.status {
        FlowStatus::Converged | FlowStatus::MaxTime => Ok(result),
        FlowStatus::Diverged => Err(OutcomeError::Unbounded { what: what() }),
        FlowStatus::InfeasibleStart => Err(OutcomeError::EmptyX { what: what() }),
    }
}

fn minimize_over_x(
    problem: &BilevelProblem,
    objective: &dyn Oracle,
    x0: &[f64],
    cfg: &FlowConfig,
    what: impl Fn() -> String,
) -> Result<FlowResult, OutcomeError> {
    let rows = problem.x_oracles();
    flow_ok(neurodynamic::solve_flow(objective, &rows, x0, cfg)?, what)
}

/// Computes `m`, the enclosing simplex, `M` and the payoff nadir.
pub fn compute_box(problem: &BilevelProblem, cfg: &FlowConfig) -> Result<OutcomeBox, OutcomeError> {
    let n = problem.n();
    let rows = problem.x_oracles();
    let start = &problem.start_point()[..n];
    let x0 = match neurodynamic::find_feasible(&rows, start, cfg) {
        Ok(x) => x,
        Err(FlowError::Expr(e)) => return Err(e.into()),
        Err(FlowError::Infeasible { .. }) => return Err(OutcomeError::EmptyX { what: "X".into() }),
    };

    let mut lower = Vec::with_capacity(problem.p());
    let mut minimizers = Vec::with_capacity(problem.p());
    for (i, f) in problem.lower().iter().enumerate() {
        let r = minimize_over_x(problem, f, &x0, cfg, || format!("min f{}", i + 1))?;
        lower.push(r.objective_value);
        minimizers.push(r.x_final);
    }

    if problem.p() == 2 {
        refine_lexicographic(problem, &lower, &mut minimizers, cfg)?;
    }

    let mut base = Vec::with_capacity(n);
    for k in 0..n {
        let obj = Function::new(Expr::var(k));
        let r = minimize_over_x(problem, &obj, &x0, cfg, || format!("min x{}", k + 1))?;
        base.push(r.objective_value);
    }
    let sum = (1..n).fold(Expr::var(0), |acc, k| acc + Expr::var(k));
    let r = minimize_over_x(problem, &Function::new(-sum), &x0, cfg, || "max Σx".into())?;
    let u_max = -r.objective_value;

    let base_sum: f64 = base.iter().sum();
    let mut simplex_vertices = vec![base.clone()];
    for i in 0..n {
        let mut v = base.clone();
        v[i] = u_max - (base_sum - base[i]);
        simplex_vertices.push(v);
    }

    let mut upper = vec![f64::NEG_INFINITY; problem.p()];
    for v in &simplex_vertices {
        for (mi, fv) in upper.iter_mut().zip(problem.outcome(v)?) {
            *mi = mi.max(fv);
        }
    }
    let mut nadir = vec![f64::NEG_INFINITY; problem.p()];
    for x in &minimizers {
        for (ni, fv) in nadir.iter_mut().zip(problem.outcome(x)?) {
            *ni = ni.max(fv);
        }
    }
    // A flow minimizer may sit a hair outside X; the nadir never needs to exceed M.
    for (ni, mi) in nadir.iter_mut().zip(&upper) {
        *ni = ni.min(*mi);
    }
    Ok(OutcomeBox { lower, upper, nadir, simplex_vertices, u_max, minimizers })
}

/// Slack on `f_i <= m_i` when minimizing the other objective over `argmin f_i`.
pub const LEXICOGRAPHIC_SLACK: f64 = 1e-6;

/// Step budget for the lexicographic stage. When `argmin f_i` is a point the
/// capped region is a tiny ball whose curved boundary makes the flow chatter
/// long after the value has settled.
pub const LEXICOGRAPHIC_MAX_STEPS: usize = 2000;

/// Replaces each minimizer of `f_i` by one that also minimizes the other
/// objective over `argmin f_i`, making the payoff nadir exact for `p = 2`.
fn refine_lexicographic(
    problem: &BilevelProblem,
    lower: &[f64],
    minimizers: &mut [Vec<f64>],
    cfg: &FlowConfig,
) -> Result<(), OutcomeError> {
    let cfg = &FlowConfig { max_steps: cfg.max_steps.min(LEXICOGRAPHIC_MAX_STEPS), ..cfg.clone() };
    for i in 0..2 {
        let j = 1 - i;
        let level = lower[i] + LEXICOGRAPHIC_SLACK * (1.0 + lower[i].abs());
        let cap = Function::new(problem.lower()[i].expr().clone() - Expr::constant(level));
        let mut rows = problem.x_oracles();
        rows.push(&cap);
        let r = neurodynamic::solve_flow(&problem.lower()[j], &rows, &minimizers[i], cfg)?;
        let r = flow_ok(r, || format!("min f{} over argmin f{}", j + 1, i + 1))?;
        minimizers[i] = r.x_final;
    }
    Ok(())
}

fn check_len(problem: &BilevelProblem, v: &[f64]) -> Result<(), OutcomeError> {
    if v.len() != problem.p() {
        return Err(OutcomeError::Dimension { expected: problem.p(), got: v.len() });
    }
    Ok(())
}

/// The ray scalarization `min_x max_j (f_j(x) - v_j) / d_j`, started at `warm` when given.
pub fn solve_ray(
    problem: &BilevelProblem,
    v: &[f64],
    direction: &[f64],
    cfg: &FlowConfig,
    warm: Option<&[f64]>,
) -> Result<RaySolution, OutcomeError> {
    check_len(problem, v)?;
    if direction.len() != problem.p() || direction.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(OutcomeError::BadDirection { expected: problem.p(), got: direction.to_vec() });
    }
    let branches = problem
        .lower()
        .iter()
        .zip(v)
        .zip(direction)
        .map(|((f, vj), dj)| (f.expr().clone() - Expr::constant(*vj)) / Expr::constant(*dj))
        .collect();
    let objective = Function::new(Expr::max(branches));
    let start = warm.map_or_else(|| problem.start_point()[..problem.n()].to_vec(), <[f64]>::to_vec);
    let r = minimize_over_x(problem, &objective, &start, cfg, || format!("ray from {v:?}"))?;
    let t = r.objective_value;
    let w = v.iter().zip(direction).map(|(vj, dj)| vj + t * dj).collect();
    Ok(RaySolution { v: v.to_vec(), t, x: r.x_final, w, direction: direction.to_vec() })
}

/// `MP(z)` over the joint point `(x, y)`, started at `warm` when given.
pub fn solve_mp(
    problem: &BilevelProblem,
    z: &[f64],
    cfg: &FlowConfig,
    warm: Option<&[f64]>,
) -> Result<MpSolution, OutcomeError> {
    check_len(problem, z)?;
    let n = problem.n();
    let rows = problem.stacked_mp_constraints(z)?;
    let stack = oracles(&rows);
    let start = warm.map_or_else(|| problem.start_point(), <[f64]>::to_vec);
    let infeasible = |u: Vec<f64>| {
        let y = u[n..].to_vec();
        let mut x = u;
        x.truncate(n);
        MpSolution { z: z.to_vec(), phi: f64::INFINITY, x, y, feasible: false }
    };
    let u0 = match neurodynamic::find_feasible(&stack, &start, cfg) {
        Ok(u) => u,
        Err(FlowError::Expr(e)) => return Err(e.into()),
        Err(FlowError::Infeasible { penalty, x }) if penalty > MP_INFEASIBLE_PENALTY => return Ok(infeasible(x)),
        Err(FlowError::Infeasible { x, .. }) => x,
    };
    let r = neurodynamic::solve_flow(problem.upper(), &stack, &u0, cfg)?;
    match r.status {
        FlowStatus::Converged | FlowStatus::MaxTime => {
            let mut x = r.x_final;
            let y = x.split_off(n);
            Ok(MpSolution { z: z.to_vec(), phi: r.objective_value, x, y, feasible: true })
        }
        FlowStatus::InfeasibleStart => Ok(infeasible(r.x_final)),
        FlowStatus::Diverged => Err(OutcomeError::Unbounded { what: format!("MP({z:?})") }),
    }
}

/// Concurrent memo of `MP(z)` keyed by `z` rounded to [`CACHE_RESOLUTION`].
#[derive(Debug, Default)]
pub struct MpCache {
    map: DashMap<Vec<i64>, MpSolution>,
}

fn cache_key(z: &[f64]) -> Vec<i64> {
    z.iter().map(|v| (v / CACHE_RESOLUTION).round() as i64).collect()
}

impl MpCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, z: &[f64]) -> Option<MpSolution> {
        self.map.get(&cache_key(z)).map(|e| e.value().clone())
    }

    pub fn insert(&self, solution: MpSolution) {
        self.map.insert(cache_key(&solution.z), solution);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Cached `MP(z)` or a fresh solve stored on return.
    pub fn solve(
        &self,
        problem: &BilevelProblem,
        z: &[f64],
        cfg: &FlowConfig,
        warm: Option<&[f64]>,
    ) -> Result<MpSolution, OutcomeError> {
        if let Some(hit) = self.get(z) {
            return Ok(hit);
        }
        let s = solve_mp(problem, z, cfg, warm)?;
        self.insert(s.clone());
        Ok(s)
    }
}
