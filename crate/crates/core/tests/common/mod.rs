#![allow(dead_code)]

use neurobilevel::bnb::SolverReport;
use neurobilevel::copolyblock::{VertexSet, VERTEX_TOL};
use neurobilevel::expr::clarke_subgradient;
use neurobilevel::problem::{parse_problem, BilevelProblem, Function};
use rand::Rng;

/// Sampling box per built-in example: covers `X` (and plausible `y`) and keeps
/// every denominator positive.
pub fn sampling_box(id: usize) -> Vec<(f64, f64)> {
    match id {
        1 => vec![(0.0, 2.5); 2],
        2 => vec![(1.0, 3.0), (1.0, 4.5)],
        3 => vec![(0.0, 2.0); 3],
        4 => vec![(-1.0, 1.0); 2],
        5 => vec![(-1.0, 2.0); 14],
        6 => vec![(0.0, 2.0); 5],
        _ => panic!("no example {id}"),
    }
}

pub fn sample_in(rng: &mut impl Rng, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect()
}

/// Points of `X` on a regular grid of `[lo, hi]^2` with spacing `h`.
pub fn grid_x2(problem: &BilevelProblem, bounds: &[(f64, f64)], h: f64) -> Vec<[f64; 2]> {
    let steps = |(lo, hi): (f64, f64)| ((hi - lo) / h).round() as usize;
    let (k0, k1) = (steps(bounds[0]), steps(bounds[1]));
    let mut out = Vec::new();
    for i in 0..=k0 {
        for j in 0..=k1 {
            let x = [bounds[0].0 + i as f64 * h, bounds[1].0 + j as f64 * h];
            if problem.x_violation(&x).unwrap() <= 0.0 {
                out.push(x);
            }
        }
    }
    out
}

/// Indices of points not strictly dominated by any other point (two objectives).
pub fn weakly_nondominated_2d(points: &[[f64; 2]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    let mut keep = Vec::new();
    // Least f2 among points with strictly smaller f1.
    let mut best_before = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut group_min = f64::INFINITY;
        while j < order.len() && points[order[j]][0] == points[order[i]][0] {
            group_min = group_min.min(points[order[j]][1]);
            j += 1;
        }
        for &idx in &order[i..j] {
            if best_before >= points[idx][1] {
                keep.push(idx);
            }
        }
        best_before = best_before.min(group_min);
        i = j;
    }
    keep
}

/// First place where `alpha` rises, `beta` falls or the gap turns negative.
pub fn monotonicity_violation(r: &SolverReport) -> Option<String> {
    for pair in r.log.windows(2) {
        if pair[1].alpha > pair[0].alpha + 1e-9 {
            return Some(format!("alpha rose at k = {}", pair[1].k));
        }
        if pair[1].beta < pair[0].beta - 1e-9 {
            return Some(format!("beta fell at k = {}", pair[1].k));
        }
    }
    r.log.iter().find(|row| row.gap < -1e-9).map(|row| format!("negative gap at k = {}", row.k))
}

/// Random lower corner, vertex and cut point `w <= v`, some coordinates on the lower face.
pub fn random_cut_case(rng: &mut impl Rng, p: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let lower: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..0.0)).collect();
    let upper: Vec<f64> = (0..p).map(|_| rng.gen_range(0.5..3.0)).collect();
    let w = lower
        .iter()
        .zip(&upper)
        .map(|(l, u)| {
            let s: f64 = rng.gen_range(0.0..=1.0);
            if s < 0.1 {
                *l
            } else {
                l + (0.999 * s) * (u - l)
            }
        })
        .collect();
    (lower, upper, w)
}

/// Cuts `v` at `w` and checks the children: one per coordinate of `w` off the
/// lower face, each equal to `v` except one coordinate lowered to `w`.
pub fn check_cut(lower: &[f64], v: &[f64], w: &[f64]) -> Result<(), String> {
    let p = v.len();
    let mut s = VertexSet::new(lower.to_vec(), v.to_vec());
    let ids = s.cut(0, w, VERTEX_TOL).map_err(|e| e.to_string())?;
    let on_face = w.iter().zip(lower).filter(|(a, b)| (*a - *b).abs() <= VERTEX_TOL).count();
    if ids.len() > p || ids.len() != p - on_face {
        return Err(format!("{} children for p = {p} with {on_face} coordinates on the face", ids.len()));
    }
    for child in s.vertices() {
        if !child.z.iter().zip(v).all(|(c, pv)| c <= pv) {
            return Err(format!("child {:?} above parent {v:?}", child.z));
        }
        let moved: Vec<usize> = (0..p).filter(|&i| child.z[i] != v[i]).collect();
        if moved.len() != 1 || child.z[moved[0]] != w[moved[0]] {
            return Err(format!("child {:?} of {v:?} at {w:?} moves {moved:?}", child.z));
        }
    }
    Ok(())
}

/// A grid outcome strictly better than `w` in both objectives by more than `margin`.
pub fn strict_dominator(zs: &[[f64; 2]], w: &[f64], margin: f64) -> Option<[f64; 2]> {
    zs.iter().find(|z| z[0] < w[0] - margin && z[1] < w[1] - margin).copied()
}

/// Outcomes of the grid points of `X` for a two-variable fixture.
pub fn outcome_grid(problem: &BilevelProblem, id: usize, h: f64) -> Vec<[f64; 2]> {
    grid_x2(problem, &sampling_box(id), h)
        .iter()
        .map(|x| {
            let f = problem.outcome(x).unwrap();
            [f[0], f[1]]
        })
        .collect()
}

/// Every expression of a fixture as a function of the joint point.
pub fn fixture_functions(p: &BilevelProblem) -> Vec<(String, Function)> {
    let mut out = vec![("h".to_string(), p.upper().clone())];
    for (i, f) in p.lower().iter().enumerate() {
        out.push((format!("f{}", i + 1), f.clone()));
    }
    for (i, r) in p.x_rows().iter().chain(p.g_rows()).enumerate() {
        out.push((format!("row {i}"), r.func.clone()));
    }
    out
}

/// Compares tape gradients with central differences at `points` smooth random
/// points per expression of fixture `id`, at relative tolerance `rel_tol`.
pub fn check_gradients(
    rng: &mut impl Rng,
    id: usize,
    p: &BilevelProblem,
    points: usize,
    rel_tol: f64,
) -> Result<(), String> {
    let dims = p.n() + p.m();
    let bounds = sampling_box(id);
    for (name, f) in fixture_functions(p) {
        let tape = f.expr().compile();
        let mut checked = 0;
        while checked < points {
            let u = sample_in(rng, &bounds);
            // Central differences are meaningless across a kink of `max`.
            if clarke_subgradient(f.expr(), &u, 1e-4).unwrap().generators.len() > 1 {
                continue;
            }
            let (_, g) = tape.value_grad(&u, 0.0).map_err(|e| e.to_string())?;
            if g.len() < f.expr().max_var().map_or(0, |m| m + 1) || g.len() > dims {
                return Err(format!("{name}: gradient length {}", g.len()));
            }
            let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            for k in 0..g.len() {
                let h = 1e-6 * (1.0 + u[k].abs());
                let (mut up, mut dn) = (u.clone(), u.clone());
                up[k] += h;
                dn[k] -= h;
                let fd = (tape.value(&up).unwrap() - tape.value(&dn).unwrap()) / (2.0 * h);
                if (g[k] - fd).abs() > rel_tol * scale {
                    return Err(format!("{name} d/du{k} at {u:?}: {} vs {fd}", g[k]));
                }
            }
            checked += 1;
        }
    }
    Ok(())
}

/// `min h.x` over the weakly efficient set of `min (f1.x, f2.x)` on `[0,1]^2 ∩ {x1 + x2 >= c}`.
pub fn linear_toy(f: [[f64; 2]; 2], h: [f64; 2], c: f64) -> BilevelProblem {
    let text = format!(
        "vars x 2\nupper {}*x1 + {}*x2\nlower {}*x1 + {}*x2\nlower {}*x1 + {}*x2\n\
         constraint_x {c} - x1 - x2\nbound x1 0 1\nbound x2 0 1\n",
        h[0], h[1], f[0][0], f[0][1], f[1][0], f[1][1]
    );
    parse_problem(&text).unwrap()
}

/// Two decimals keep toy coefficients exactly representable in the problem text.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Brute force of [`linear_toy`] on a regular grid: the least grid value of `φ`
/// over grid outcomes that no grid outcome strictly dominates.
pub fn brute_force_linear(f: [[f64; 2]; 2], h: [f64; 2], c: f64) -> f64 {
    let k = 200;
    let mut xs = Vec::new();
    for i in 0..=k {
        for j in 0..=k {
            let x = [i as f64 / k as f64, j as f64 / k as f64];
            if x[0] + x[1] >= c - 1e-12 {
                xs.push(x);
            }
        }
    }
    let zs: Vec<[f64; 2]> =
        xs.iter().map(|x| [f[0][0] * x[0] + f[0][1] * x[1], f[1][0] * x[0] + f[1][1] * x[1]]).collect();
    let hv: Vec<f64> = xs.iter().map(|x| h[0] * x[0] + h[1] * x[1]).collect();
    let phi = |z: &[f64; 2]| {
        zs.iter()
            .zip(&hv)
            .filter(|(w, _)| w[0] <= z[0] + 1e-12 && w[1] <= z[1] + 1e-12)
            .map(|(_, h)| *h)
            .fold(f64::INFINITY, f64::min)
    };
    weakly_nondominated_2d(&zs).iter().map(|&i| phi(&zs[i])).fold(f64::INFINITY, f64::min)
}
