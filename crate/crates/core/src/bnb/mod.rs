//! Branch-and-bound over inner copolyblock approximations of the outcome set:
//! `β_k = min φ(v)` over the vertex set bounds the optimum from below, and
//! weakly efficient points found by rays bound it from above.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::copolyblock::{CopolyblockError, VertexSet};
use crate::expr::{ExprError, SubgradientBundle};
use crate::neurodynamic::{self, FlowConfig, FlowError, FlowStatus, Oracle};
use crate::outcome::{self, CornerRule, MpCache, MpSolution, OutcomeBox, OutcomeError};
use crate::problem::{BilevelProblem, Function};

/// Constraint slack accepted when certifying `(x, y) ∈ G`.
pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error(transparent)]
    Outcome(#[from] OutcomeError),
    #[error(transparent)]
    Copolyblock(#[from] CopolyblockError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative gap `ε` of the stopping test `α - β <= ε (1 + |β|)`.
    pub epsilon: f64,
    /// Ray direction `d̂`; all ones when `None`.
    pub direction: Option<Vec<f64>>,
    pub flow: FlowConfig,
    pub max_iterations: usize,
    /// Band for `z_i = m_i` tests.
    pub boundary_tol: f64,
    /// `w = z` when `‖w - z‖_∞` is within this.
    pub frontier_tol: f64,
    pub corner: CornerRule,
    /// Evaluate pending vertices concurrently.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-2,
            direction: None,
            flow: FlowConfig::default(),
            max_iterations: 500,
            boundary_tol: 1e-9,
            frontier_tol: 1e-4,
            corner: CornerRule::Auto,
            parallel: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, p: usize) -> Result<(), SolverError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(SolverError::Config("epsilon must be positive".into()));
        }
        if let Some(d) = &self.direction {
            if d.len() != p || d.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(SolverError::Config(format!("direction must have {p} positive entries")));
            }
        }
        if self.max_iterations == 0 {
            return Err(SolverError::Config("max_iterations must be at least 1".into()));
        }
        if !(self.boundary_tol >= 0.0 && self.frontier_tol >= 0.0) {
            return Err(SolverError::Config("tolerances must be nonnegative".into()));
        }
        self.flow.validate().map_err(|e| SolverError::Config(e.to_string()))
    }

    fn direction_for(&self, p: usize) -> Vec<f64> {
        self.direction.clone().unwrap_or_else(|| vec![1.0; p])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `α - β <= ε (1 + |β|)`.
    Gap,
    /// The vertex set emptied; `α` is optimal.
    Exhausted,
    /// No feasible point exists.
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub k: usize,
    pub v: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gap: f64,
}

#[derive(Debug)]
pub struct SolverState {
    pub outcome_box: OutcomeBox,
    pub vertices: VertexSet,
    pub alpha: f64,
    pub beta: f64,
    pub incumbent: Option<Incumbent>,
    pub k: usize,
    pub log: Vec<IterationRow>,
    pub terminated: Option<Termination>,
    pub cache: MpCache,
    direction: Vec<f64>,
}

impl SolverState {
    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    fn offer(&mut self, x: &[f64], y: &[f64], h: f64) {
        if h < self.alpha {
            self.alpha = h;
            self.incumbent = Some(Incumbent { x: x.to_vec(), y: y.to_vec(), h });
        }
    }

    fn gap_closed(&self, epsilon: f64) -> bool {
        self.alpha - self.beta <= epsilon * (1.0 + self.beta.abs())
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub status: Status,
    pub termination: Termination,
    pub incumbent: Option<Incumbent>,
    pub alpha: f64,
    pub beta: f64,
    pub outcome_box: OutcomeBox,
    pub log: Vec<IterationRow>,
    pub iterations: usize,
    pub wall_time: Duration,
}

impl SolverReport {
    pub fn gap(&self) -> f64 {
        self.alpha - self.beta
    }
}

/// Computes the box, seeds `V⁰` with the upper corner and bounds from the
/// boundary problems `MP(M - (M_i - m_i) e^i)` and `MP(corner)`.
pub fn initialize(problem: &BilevelProblem, cfg: &SolverConfig) -> Result<SolverState, SolverError> {
    cfg.validate(problem.p())?;
    let outcome_box = outcome::compute_box(problem, &cfg.flow)?;
    let corner = outcome_box.corner(cfg.corner).to_vec();
    let mut state = SolverState {
        vertices: VertexSet::new(outcome_box.lower.clone(), corner.clone()),
        alpha: f64::INFINITY,
        beta: f64::NEG_INFINITY,
        incumbent: None,
        k: 0,
        log: Vec::new(),
        terminated: None,
        cache: MpCache::new(),
        direction: cfg.direction_for(problem.p()),
        outcome_box,
    };

    let mut queries: Vec<Vec<f64>> = (0..problem.p()).map(|i| state.outcome_box.initializer(i)).collect();
    queries.push(corner);
    let solved = solve_many(problem, &state.cache, &queries, &vec![None; queries.len()], cfg)?;
    let (boundary, root) = solved.split_at(problem.p());
    for s in boundary.iter().filter(|s| s.feasible) {
        state.offer(&s.x, &s.y, s.phi);
    }
    let root = root[0].clone();
    if !root.feasible && state.alpha.is_infinite() {
        state.terminated = Some(Termination::Infeasible);
        return Ok(state);
    }
    let v0 = &mut state.vertices.vertices_mut()[0];
    v0.warm = Some(problem.joint(&root.x, &root.y));
    v0.phi = root.feasible.then_some(root.phi);
    v0.mp = Some(root.clone());
    if root.feasible {
        state.beta = root.phi.min(state.alpha);
    } else {
        state.vertices.prune();
    }
    Ok(state)
}

/// One pass of evaluate, select, ray, update, test and cut.
pub fn iterate(state: &mut SolverState, problem: &BilevelProblem, cfg: &SolverConfig) -> Result<(), SolverError> {
    if state.terminated.is_some() {
        return Ok(());
    }
    evaluate_pending(state, problem, cfg)?;
    let lower = state.outcome_box.lower.clone();
    let touching: Vec<u64> = state
        .vertices
        .vertices()
        .iter()
        .filter(|v| {
            v.mp.as_ref().is_some_and(|s| {
                s.feasible
                    && problem
                        .outcome(&s.x)
                        .is_ok_and(|f| f.iter().zip(&lower).any(|(fi, mi)| (fi - mi).abs() <= cfg.boundary_tol))
            })
        })
        .map(|v| v.id)
        .collect();
    for id in touching {
        state.vertices.remove(id);
    }
    state.vertices.prune();

    if state.vertices.is_empty() {
        state.terminated = Some(if state.alpha.is_finite() {
            state.beta = state.alpha;
            Termination::Exhausted
        } else {
            Termination::Infeasible
        });
        return Ok(());
    }

    state.k += 1;
    let (vk, beta) = state.vertices.select_min_phi()?;
    let (vid, vz) = (vk.id, vk.z.clone());
    let mp = vk.mp.clone().expect("evaluated vertices carry their MP solution");
    state.beta = state.beta.max(beta);

    let ray = outcome::solve_ray(problem, &vz, &state.direction, &cfg.flow, Some(&mp.x))?;
    // t <= 0 whenever MP(v) is feasible; clamp round-off so the cut stays below v.
    let w: Vec<f64> = ray.w.iter().zip(&vz).map(|(wi, vi)| wi.min(*vi)).collect();
    let zk = problem.outcome(&ray.x)?;
    let on_frontier = w.iter().zip(&zk).all(|(wi, zi)| (wi - zi).abs() <= cfg.frontier_tol);
    let interior = w.iter().zip(&lower).all(|(wi, mi)| *wi > mi + cfg.boundary_tol);
    // A failed frontier test leaves no candidate; nothing stale is re-applied.
    if on_frontier && interior {
        if let Some(y) = find_feasible_y(problem, &ray.x, Some(&mp.y), cfg)? {
            let h = problem.upper_value(&ray.x, &y)?;
            state.offer(&ray.x, &y, h);
        }
    }
    state.beta = state.beta.min(state.alpha);
    state.log.push(IterationRow {
        k: state.k,
        v: vz,
        alpha: state.alpha,
        beta: state.beta,
        gap: state.alpha - state.beta,
    });
    if state.gap_closed(cfg.epsilon) {
        state.terminated = Some(Termination::Gap);
        return Ok(());
    }
    let children = state.vertices.cut(vid, &w, cfg.boundary_tol)?;
    let warm = problem.joint(&ray.x, &mp.y);
    for v in state.vertices.vertices_mut().iter_mut().filter(|v| children.contains(&v.id)) {
        v.warm = Some(warm.clone());
    }
    state.vertices.prune();
    Ok(())
}

fn solve_many(
    problem: &BilevelProblem,
    cache: &MpCache,
    zs: &[Vec<f64>],
    warms: &[Option<Vec<f64>>],
    cfg: &SolverConfig,
) -> Result<Vec<MpSolution>, SolverError> {
    let one = |(z, w): (&Vec<f64>, &Option<Vec<f64>>)| cache.solve(problem, z, &cfg.flow, w.as_deref());
    let out: Result<Vec<_>, OutcomeError> = if cfg.parallel {
        zs.par_iter().zip(warms.par_iter()).map(one).collect()
    } else {
        zs.iter().zip(warms).map(one).collect()
    };
    Ok(out?)
}

fn evaluate_pending(state: &mut SolverState, problem: &BilevelProblem, cfg: &SolverConfig) -> Result<(), SolverError> {
    let pending: Vec<(u64, Vec<f64>, Option<Vec<f64>>)> = state
        .vertices
        .vertices()
        .iter()
        .filter(|v| v.mp.is_none())
        .map(|v| (v.id, v.z.clone(), v.warm.clone()))
        .collect();
    if pending.is_empty() {
        return Ok(());
    }
    let zs: Vec<Vec<f64>> = pending.iter().map(|p| p.1.clone()).collect();
    let warms: Vec<Option<Vec<f64>>> = pending.iter().map(|p| p.2.clone()).collect();
    let solved = solve_many(problem, &state.cache, &zs, &warms, cfg)?;
    for ((id, _, _), s) in pending.into_iter().zip(solved) {
        let v = state.vertices.vertices_mut().iter_mut().find(|v| v.id == id).expect("pending id");
        // φ is nonincreasing and children lie below their parent.
        v.phi = s.feasible.then(|| s.phi.max(v.phi_floor));
        if s.feasible {
            v.warm = Some(problem.joint(&s.x, &s.y));
        }
        v.mp = Some(s);
    }
    Ok(())
}

/// Restricts a joint-point function to `y` at fixed `x`.
struct AtX<'a> {
    f: &'a Function,
    x: &'a [f64],
}

impl AtX<'_> {
    fn joint(&self, y: &[f64]) -> Vec<f64> {
        self.x.iter().chain(y).copied().collect()
    }
}

impl Oracle for AtX<'_> {
    fn value(&self, y: &[f64]) -> Result<f64, ExprError> {
        self.f.value(&self.joint(y))
    }

    fn value_grad(&self, y: &[f64]) -> Result<(f64, Vec<f64>), ExprError> {
        let (v, mut g) = self.f.value_grad(&self.joint(y))?;
        Ok((v, g.split_off(self.x.len())))
    }

    fn value_bundle(&self, y: &[f64], active_tol: f64) -> Result<(f64, SubgradientBundle), ExprError> {
        let (v, mut b) = self.f.value_bundle(&self.joint(y), active_tol)?;
        let n = self.x.len();
        for g in &mut b.generators {
            g.drain(..n);
        }
        b.selection.drain(..n);
        Ok((v, b))
    }
}

/// A `y >= 0` with `g(x, y) <= 0` minimizing `h(x, ·)`, or `None` when the
/// slice of `G` at `x` is empty. Without `y` variables this is a membership test.
pub fn find_feasible_y(
    problem: &BilevelProblem,
    x: &[f64],
    warm: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<Option<Vec<f64>>, SolverError> {
    let m = problem.m();
    if problem.x_violation(x)? > CERTIFY_TOL {
        return Ok(None);
    }
    if m == 0 {
        return Ok(problem.region().contains(x, &[], CERTIFY_TOL)?.then(Vec::new));
    }
    let n = problem.n();
    let nonneg: Vec<Function> = (0..m).map(|j| Function::new(-crate::expr::Expr::var(n + j))).collect();
    let rows: Vec<AtX> = problem.g_rows().iter().map(|r| &r.func).chain(&nonneg).map(|f| AtX { f, x }).collect();
    let oracles: Vec<&dyn Oracle> = rows.iter().map(|r| r as &dyn Oracle).collect();
    let y0 = warm.map_or_else(|| vec![0.0; m], <[f64]>::to_vec);
    let y = match neurodynamic::find_feasible(&oracles, &y0, &cfg.flow) {
        Ok(y) => y,
        Err(FlowError::Expr(e)) => return Err(e.into()),
        Err(_) => return Ok(None),
    };
    let objective = AtX { f: problem.upper(), x };
    let r = neurodynamic::solve_flow(&objective, &oracles, &y, &cfg.flow)?;
    let best = match r.status {
        FlowStatus::Converged | FlowStatus::MaxTime => r.x_final,
        FlowStatus::Diverged | FlowStatus::InfeasibleStart => y,
    };
    Ok(problem.region().contains(x, &best, CERTIFY_TOL)?.then_some(best))
}

/// Runs [`initialize`] then [`iterate`] until the gap closes, the vertex set
/// empties or `max_iterations` is reached.
pub fn solve(problem: &BilevelProblem, cfg: &SolverConfig) -> Result<SolverReport, SolverError> {
    let started = Instant::now();
    let mut state = initialize(problem, cfg)?;
    while state.terminated.is_none() && state.k < cfg.max_iterations {
        iterate(&mut state, problem, cfg)?;
    }
    let termination = state.terminated.unwrap_or(Termination::MaxIterations);
    let status = match termination {
        Termination::Gap | Termination::Exhausted => Status::Optimal,
        Termination::Infeasible => Status::Infeasible,
        Termination::MaxIterations => Status::MaxIterations,
    };
    Ok(SolverReport {
        status,
        termination,
        incumbent: state.incumbent,
        alpha: state.alpha,
        beta: state.beta,
        outcome_box: state.outcome_box,
        log: state.log,
        iterations: state.k,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests;
