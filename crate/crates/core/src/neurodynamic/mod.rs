//! Neurodynamic solver for nonsmooth pseudoconvex programs
//! `min r(x) s.t. s_i(x) <= 0`.
//!
//! The state follows the inclusion `x' ∈ -c(x) ∂r(x) - ∂S(x)`. It descends
//! `r` inside the feasible set `X` and descends the penalty
//! `S = Σ max(0, s_i)` outside it. Each step is an explicit Euler step with
//! backtracking. Inside `X` the step follows the objective direction.
//! Whenever a step leaves `X`, the outside phase (`c = 0`, `x' = -∂S`) is
//! integrated in fast time until the state is back in `X`. Only then is the
//! objective tested for descent. The reported velocity is the effective
//! velocity `(x_{k+1} - x_k) / dt`, which vanishes at constrained optima.

mod minnorm;
mod trace;

use thiserror::Error;

use crate::expr::{Compiled, ExprError, SubgradientBundle, DEFAULT_ACTIVE_TOL};

pub use minnorm::{min_norm_hull_plus_cone, min_norm_point};
pub use trace::FlowTrace;

/// Values with `|xi| <= ZERO_BAND` count as zero for `psi`.
pub const ZERO_BAND: f64 = 1e-9;
/// Cap on step halvings per Euler step.
pub const MAX_HALVINGS: u32 = 30;

/// Anything that can be evaluated and (sub)differentiated at a point.
pub trait Oracle: Send + Sync {
    fn value(&self, x: &[f64]) -> Result<f64, ExprError>;

    /// Value and a selected element of the Clarke subdifferential.
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ExprError>;

    /// Value and the full subgradient bundle with activity band `active_tol`.
    fn value_bundle(&self, x: &[f64], active_tol: f64) -> Result<(f64, SubgradientBundle), ExprError>;
}

impl Oracle for Compiled {
    fn value(&self, x: &[f64]) -> Result<f64, ExprError> {
        Compiled::value(self, x)
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ExprError> {
        Compiled::value_grad(self, x, DEFAULT_ACTIVE_TOL)
    }

    fn value_bundle(&self, x: &[f64], active_tol: f64) -> Result<(f64, SubgradientBundle), ExprError> {
        Compiled::value_bundle(self, x, active_tol)
    }
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_max: f64,
    pub stationarity_tol: f64,
    pub feasibility_tol: f64,
    pub psi_zero_selection: f64,
    pub max_steps: usize,
    pub divergence_radius: f64,
    /// Step size never grows beyond `dt * max_dt_growth`.
    pub max_dt_growth: f64,
    /// Refuse infeasible starting points instead of restoring feasibility first.
    pub strict_start: bool,
    pub trace: Option<FlowTrace>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: 1e-2,
            t_max: 200.0,
            stationarity_tol: 1e-6,
            feasibility_tol: 1e-7,
            psi_zero_selection: 0.5,
            max_steps: 200_000,
            divergence_radius: 1e7,
            max_dt_growth: 1e4,
            strict_start: false,
            trace: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("flow config field `{0}` is out of range")]
    OutOfRange(&'static str),
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let checks = [
            (self.dt > 0.0, "dt"),
            (self.t_max > 0.0, "t_max"),
            (self.stationarity_tol > 0.0, "stationarity_tol"),
            (self.feasibility_tol > 0.0, "feasibility_tol"),
            ((0.0..=1.0).contains(&self.psi_zero_selection), "psi_zero_selection"),
            (self.max_steps > 0, "max_steps"),
            (self.divergence_radius > 0.0, "divergence_radius"),
            (self.max_dt_growth >= 1.0, "max_dt_growth"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, name)) => Err(ConfigError::OutOfRange(name)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    Converged,
    MaxTime,
    Diverged,
    InfeasibleStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub x_final: Vec<f64>,
    pub objective_value: f64,
    pub penalty_residual: f64,
    pub status: FlowStatus,
    pub steps: usize,
    pub time: f64,
    pub final_velocity: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("feasibility flow stalled at penalty {penalty:.3e}")]
    Infeasible { penalty: f64, x: Vec<f64> },
}

/// Heaviside selection: 1 above the zero band, 0 below, `selection` inside.
pub fn psi(xi: f64, selection: f64) -> f64 {
    if xi > ZERO_BAND {
        1.0
    } else if xi < -ZERO_BAND {
        0.0
    } else {
        selection
    }
}

/// `S(x) = Σ max(0, s_i(x))`.
pub fn penalty(x: &[f64], constraints: &[&dyn Oracle]) -> Result<f64, ExprError> {
    constraints.iter().try_fold(0.0, |acc, c| Ok(acc + c.value(x)?.max(0.0)))
}

/// `Σ_{I+} ∇s_i + selection · Σ_{I0} ∇s_i`, zero strictly inside.
pub fn penalty_subgradient(x: &[f64], constraints: &[&dyn Oracle], selection: f64) -> Result<Vec<f64>, ExprError> {
    let mut out = vec![0.0; x.len()];
    for c in constraints {
        let v = c.value(x)?;
        let w = psi(v, selection);
        if w > 0.0 {
            let (_, g) = c.value_grad(x)?;
            axpy(&mut out, w, &g);
        }
    }
    Ok(out)
}

/// `c(x) = Π (1 - psi(s_i(x)))`.
pub fn step_gain(x: &[f64], constraints: &[&dyn Oracle], selection: f64) -> Result<f64, ExprError> {
    constraints.iter().try_fold(1.0, |acc, c| Ok(acc * (1.0 - psi(c.value(x)?, selection))))
}

/// Flows along `-∂S` until `S <= feasibility_tol`.
pub fn find_feasible(constraints: &[&dyn Oracle], x_init: &[f64], config: &FlowConfig) -> Result<Vec<f64>, FlowError> {
    let mut trace = config.trace.as_ref().map(|t| t.block("feasibility", x_init.len()));
    let out = penalty_descent(x_init, constraints, config, config.feasibility_tol, config.max_steps, trace.as_mut());
    if let (Some(t), Some(block)) = (config.trace.as_ref(), trace) {
        t.commit(block);
    }
    out
}

/// Integrates the inclusion for `min objective s.t. constraints <= 0`.
pub fn solve_flow(
    objective: &dyn Oracle,
    constraints: &[&dyn Oracle],
    x0: &[f64],
    config: &FlowConfig,
) -> Result<FlowResult, ExprError> {
    let mut trace = config.trace.as_ref().map(|t| t.block("objective", x0.len()));
    let out = integrate(objective, constraints, x0, config, trace.as_mut());
    if let (Some(t), Some(block)) = (config.trace.as_ref(), trace) {
        t.commit(block);
    }
    out
}

fn integrate(
    objective: &dyn Oracle,
    constraints: &[&dyn Oracle],
    x0: &[f64],
    cfg: &FlowConfig,
    mut trace: Option<&mut trace::Block>,
) -> Result<FlowResult, ExprError> {
    let start_penalty = penalty(x0, constraints)?;
    let mut x = x0.to_vec();
    if start_penalty > cfg.feasibility_tol {
        let restored = if cfg.strict_start {
            None
        } else {
            match penalty_descent(x0, constraints, cfg, cfg.feasibility_tol, cfg.max_steps, None) {
                Ok(p) => Some(p),
                Err(FlowError::Expr(e)) => return Err(e),
                Err(FlowError::Infeasible { .. }) => None,
            }
        };
        match restored {
            Some(p) => x = p,
            None => return finish(objective, constraints, x, FlowStatus::InfeasibleStart, 0, 0.0, f64::NAN),
        }
    }

    let dt_max = cfg.dt * cfg.max_dt_growth;
    // Hysteresis: tangent steps may drift up to the trigger before restoring to the target.
    let restore_trigger = cfg.feasibility_tol * 1e-1;
    let restore_target = cfg.feasibility_tol * 1e-2;
    let mut dt = cfg.dt;
    let mut t = 0.0;
    let mut steps = 0;
    let mut band = DEFAULT_ACTIVE_TOL;
    let mut last_velocity = f64::NAN;
    let (mut r, mut bundle) = objective.value_bundle(&x, band)?;
    loop {
        if steps >= cfg.max_steps || t >= cfg.t_max {
            return finish(objective, constraints, x, FlowStatus::MaxTime, steps, t, last_velocity);
        }
        // A widened activity band may hide descent along a kink; stationarity
        // is only declared once the narrow band agrees.
        let widened = band > DEFAULT_ACTIVE_TOL;
        let raw = direction(&bundle);
        let raw_norm = norm(&raw);
        // Slide along constraints the step could reach: project onto their tangent cone.
        let reach = if widened { dt * raw_norm } else { 0.0 };
        let xi = if raw_norm <= cfg.stationarity_tol {
            raw
        } else {
            let rays = near_active_normals(&x, constraints, reach)?;
            min_norm_hull_plus_cone(&bundle.generators, &rays)
        };
        let xi_norm = norm(&xi);
        if let Some(tr) = trace.as_deref_mut() {
            tr.row(t, &x, r, penalty(&x, constraints)?, xi_norm);
        }
        if xi_norm <= cfg.stationarity_tol {
            if widened {
                band = DEFAULT_ACTIVE_TOL;
                (r, bundle) = objective.value_bundle(&x, band)?;
                continue;
            }
            return finish(objective, constraints, x, FlowStatus::Converged, steps, t, xi_norm);
        }

        let dt_start = dt;
        let mut accepted = None;
        for halving in 0..=MAX_HALVINGS {
            let mut trial: Vec<f64> = x.iter().zip(&xi).map(|(a, g)| a - dt * g).collect();
            if norm(&trial) > cfg.divergence_radius {
                return finish(objective, constraints, trial, FlowStatus::Diverged, steps, t, last_velocity);
            }
            if penalty(&trial, constraints)? > restore_trigger {
                match penalty_descent(&trial, constraints, cfg, restore_target, 500, None) {
                    Ok(p) => trial = p,
                    Err(FlowError::Expr(e)) => return Err(e),
                    // On thin regions the descent may stall short of the target; back under the trigger suffices.
                    Err(FlowError::Infeasible { penalty, x }) if penalty < restore_trigger => trial = x,
                    Err(_) => {
                        dt *= 0.5;
                        continue;
                    }
                }
            }
            let r_new = objective.value(&trial)?;
            if r_new <= r {
                accepted = Some((trial, halving));
                break;
            }
            dt *= 0.5;
        }
        let Some((next, halvings)) = accepted else {
            if widened {
                dt = dt_start;
                band = DEFAULT_ACTIVE_TOL;
                (r, bundle) = objective.value_bundle(&x, band)?;
                continue;
            }
            // No admissible move at any resolution: the state is stationary.
            return finish(objective, constraints, x, FlowStatus::Converged, steps, t, 0.0);
        };

        let velocity = dist(&next, &x) / dt;
        x = next;
        t += dt;
        steps += 1;
        last_velocity = velocity;
        if velocity <= cfg.stationarity_tol && !widened {
            return finish(objective, constraints, x, FlowStatus::Converged, steps, t, velocity);
        }
        band = if velocity <= cfg.stationarity_tol {
            DEFAULT_ACTIVE_TOL
        } else {
            (dt * xi_norm * xi_norm).max(DEFAULT_ACTIVE_TOL)
        };
        if halvings == 0 {
            dt = (dt * 2.0).min(dt_max);
        }
        (r, bundle) = objective.value_bundle(&x, band)?;
    }
}

fn finish(
    objective: &dyn Oracle,
    constraints: &[&dyn Oracle],
    x: Vec<f64>,
    status: FlowStatus,
    steps: usize,
    time: f64,
    final_velocity: f64,
) -> Result<FlowResult, ExprError> {
    let penalty_residual = penalty(&x, constraints)?;
    let objective_value = objective.value(&x)?;
    Ok(FlowResult { x_final: x, objective_value, penalty_residual, status, steps, time, final_velocity })
}

/// Rows whose boundary lies within this distance always constrain the direction.
const SLIDE_BAND: f64 = 1e-6;

/// Gradients of rows whose boundary is within `max(SLIDE_BAND, reach)` of `x`,
/// with distance estimated as `-s_i / |∇s_i|`.
fn near_active_normals(x: &[f64], constraints: &[&dyn Oracle], reach: f64) -> Result<Vec<Vec<f64>>, ExprError> {
    let band = reach.max(SLIDE_BAND);
    let mut rays = Vec::new();
    for c in constraints {
        let (v, b) = c.value_bundle(x, DEFAULT_ACTIVE_TOL)?;
        if v >= 0.0 {
            rays.extend(b.generators);
            continue;
        }
        for g in b.generators {
            if -v <= band * norm(&g) {
                rays.push(g);
            }
        }
    }
    Ok(rays)
}

/// Steepest-descent element of the bundle's hull.
fn direction(bundle: &SubgradientBundle) -> Vec<f64> {
    if bundle.generators.len() == 1 {
        bundle.generators[0].clone()
    } else {
        min_norm_point(&bundle.generators)
    }
}

/// Activity bands tried in turn when the narrower one yields no descent step.
const PENALTY_BANDS: [f64; 4] = [ZERO_BAND, 1e-6, 1e-4, 1e-2];
const BLOCK_SWEEPS: usize = 50;

/// Minimum-norm element of the `band`-enlarged subdifferential of `S`: the sum
/// over rows above the band of their Clarke hulls, plus `[0, 1]` times the hulls
/// of rows within the band. Solved by exact block-coordinate minimization.
fn penalty_direction(x: &[f64], constraints: &[&dyn Oracle], band: f64) -> Result<Vec<f64>, ExprError> {
    let mut blocks: Vec<(Vec<Vec<f64>>, bool)> = Vec::new();
    for c in constraints {
        let (v, b) = c.value_bundle(x, DEFAULT_ACTIVE_TOL)?;
        if v > band {
            blocks.push((b.generators, false));
        } else if v >= -band {
            blocks.push((b.generators, true));
        }
    }
    let mut parts: Vec<Vec<f64>> =
        blocks.iter().map(|(g, capped)| if *capped { vec![0.0; x.len()] } else { direction_of(g) }).collect();
    let mut total = vec![0.0; x.len()];
    for p in &parts {
        axpy(&mut total, 1.0, p);
    }
    if blocks.iter().all(|(g, capped)| g.len() == 1 && !capped) {
        return Ok(total);
    }
    let mut best = dot(&total, &total);
    for _ in 0..BLOCK_SWEEPS {
        for ((gens, capped), part) in blocks.iter().zip(parts.iter_mut()) {
            let rest: Vec<f64> = total.iter().zip(part.iter()).map(|(t, p)| t - p).collect();
            let mut points: Vec<Vec<f64>> =
                gens.iter().map(|g| rest.iter().zip(g).map(|(r, gi)| r + gi).collect()).collect();
            if *capped {
                points.push(rest.clone());
            }
            total = min_norm_point(&points);
            *part = total.iter().zip(&rest).map(|(t, r)| t - r).collect();
        }
        let now = dot(&total, &total);
        if now >= best * (1.0 - 1e-12) {
            break;
        }
        best = now;
    }
    Ok(total)
}

fn direction_of(generators: &[Vec<f64>]) -> Vec<f64> {
    if generators.len() == 1 {
        generators[0].clone()
    } else {
        min_norm_point(generators)
    }
}

/// Penalty descent along the steepest-descent direction of `S` with
/// Polyak-sized steps, backtracked so that `S` strictly decreases.
fn penalty_descent(
    x0: &[f64],
    constraints: &[&dyn Oracle],
    cfg: &FlowConfig,
    target: f64,
    max_iter: usize,
    mut trace: Option<&mut trace::Block>,
) -> Result<Vec<f64>, FlowError> {
    const STALL_WINDOW: usize = 50;
    let mut x = x0.to_vec();
    let mut s = penalty(&x, constraints)?;
    let mut t = 0.0;
    let mut reference = (s, 0usize);
    for iter in 0..max_iter {
        if s <= target {
            if let Some(tr) = trace.as_deref_mut() {
                tr.row(t, &x, s, s, 0.0);
            }
            return Ok(x);
        }
        let mut moved = false;
        for (b, band) in PENALTY_BANDS.iter().enumerate() {
            let g = penalty_direction(&x, constraints, *band)?;
            let gn2 = dot(&g, &g);
            if b == 0 {
                if let Some(tr) = trace.as_deref_mut() {
                    tr.row(t, &x, s, s, gn2.sqrt());
                }
                // Zero in the exact subdifferential: a positive minimum of S.
                if gn2.sqrt() <= cfg.stationarity_tol {
                    return Err(FlowError::Infeasible { penalty: s, x });
                }
            }
            if gn2 == 0.0 {
                continue;
            }
            // Near a positive minimum of S the direction is tiny and the Polyak
            // step huge; cap its length and let backtracking shorten it.
            let mut eta = (s / gn2).min(cfg.divergence_radius / gn2.sqrt());
            for _ in 0..=2 * MAX_HALVINGS {
                let trial: Vec<f64> = x.iter().zip(&g).map(|(a, gi)| a - eta * gi).collect();
                // Rejected trials, including ones the expressions cannot evaluate, are halved.
                if let Ok(s_new) = penalty(&trial, constraints) {
                    if s_new < s && norm(&trial) <= cfg.divergence_radius {
                        x = trial;
                        s = s_new;
                        t += eta;
                        moved = true;
                        break;
                    }
                }
                eta *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            return Err(FlowError::Infeasible { penalty: s, x });
        }
        if s < reference.0 * (1.0 - 1e-9) {
            reference = (s, iter);
        } else if iter - reference.1 >= STALL_WINDOW {
            return Err(FlowError::Infeasible { penalty: s, x });
        }
    }
    if s <= target {
        Ok(x)
    } else {
        Err(FlowError::Infeasible { penalty: s, x })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
