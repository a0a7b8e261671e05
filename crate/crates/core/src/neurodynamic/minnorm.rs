//! Minimum-norm points of convex hulls and of hulls plus finitely generated cones.

use super::dot;

/// Exact enumeration is used up to this many generators, Frank-Wolfe beyond.
const EXACT_LIMIT: usize = 10;

/// The point of `conv(generators)` closest to the origin.
pub fn min_norm_point(generators: &[Vec<f64>]) -> Vec<f64> {
    assert!(!generators.is_empty(), "min_norm_point needs at least one generator");
    let k = generators.len();
    // Unit-scale copies keep the Gram matrix finite near poles of a ratio.
    let scale = generators.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return generators[0].clone();
    }
    let unit: Vec<Vec<f64>> = generators.iter().map(|g| g.iter().map(|v| v / scale).collect()).collect();
    let gram: Vec<Vec<f64>> = unit.iter().map(|a| unit.iter().map(|b| dot(a, b)).collect()).collect();
    let lambda = if k <= EXACT_LIMIT { exact(&gram) } else { frank_wolfe(&gram) };
    combine(generators, &lambda)
}

const CONE_SWEEPS: usize = 1000;

/// The point of `conv(generators) + cone(rays)` closest to the origin, by
/// exact block-coordinate minimization (hull block, then one scalar per ray).
pub fn min_norm_hull_plus_cone(generators: &[Vec<f64>], rays: &[Vec<f64>]) -> Vec<f64> {
    let mut total = min_norm_point(generators);
    if rays.is_empty() {
        return total;
    }
    let mut hull_part = total.clone();
    let mut mu = vec![0.0; rays.len()];
    let norms: Vec<f64> = rays.iter().map(|a| dot(a, a)).collect();
    let mut prev = dot(&total, &total);
    for _ in 0..CONE_SWEEPS {
        for ((a, aa), m) in rays.iter().zip(&norms).zip(mu.iter_mut()) {
            if *aa == 0.0 {
                continue;
            }
            let next = (*m - dot(&total, a) / aa).max(0.0);
            let delta = next - *m;
            if delta != 0.0 {
                for (t, ai) in total.iter_mut().zip(a) {
                    *t += delta * ai;
                }
                *m = next;
            }
        }
        if generators.len() > 1 {
            let rest: Vec<f64> = total.iter().zip(&hull_part).map(|(t, h)| t - h).collect();
            let shifted: Vec<Vec<f64>> =
                generators.iter().map(|g| g.iter().zip(&rest).map(|(gi, r)| gi + r).collect()).collect();
            total = min_norm_point(&shifted);
            hull_part = total.iter().zip(&rest).map(|(t, r)| t - r).collect();
        }
        let now = dot(&total, &total);
        if now <= 1e-30 || now >= prev * (1.0 - 1e-12) {
            break;
        }
        prev = now;
    }
    total
}

fn combine(generators: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; generators[0].len()];
    for (g, l) in generators.iter().zip(lambda) {
        for (o, gi) in out.iter_mut().zip(g) {
            *o += l * gi;
        }
    }
    out
}

fn quad(gram: &[Vec<f64>], lambda: &[f64]) -> f64 {
    let mut q = 0.0;
    for (i, li) in lambda.iter().enumerate() {
        for (j, lj) in lambda.iter().enumerate() {
            q += li * lj * gram[i][j];
        }
    }
    q
}

/// Tries every support set; each affine subproblem is a small KKT system.
fn exact(gram: &[Vec<f64>]) -> Vec<f64> {
    let k = gram.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let Some(weights) = affine_min_norm(gram, &support) else {
            continue;
        };
        if weights.iter().any(|w| *w < -1e-12) {
            continue;
        }
        let mut lambda = vec![0.0; k];
        for (i, w) in support.iter().zip(&weights) {
            lambda[*i] = w.max(0.0);
        }
        let total: f64 = lambda.iter().sum();
        lambda.iter_mut().for_each(|l| *l /= total);
        let q = quad(gram, &lambda);
        if best.as_ref().is_none_or(|(bq, _)| q < *bq - 1e-15) {
            best = Some((q, lambda));
        }
    }
    best.expect("singletons are always admissible").1
}

/// Solves `[G 1; 1ᵀ 0][λ; μ] = [0; 1]` on `support`.
fn affine_min_norm(gram: &[Vec<f64>], support: &[usize]) -> Option<Vec<f64>> {
    let s = support.len();
    let n = s + 1;
    let mut a = vec![vec![0.0; n + 1]; n];
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[r][c] = gram[i][j];
        }
        a[r][s] = 1.0;
        a[s][r] = 1.0;
    }
    a[s][n] = 1.0;
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (dst, src) in a[row][col..=n].iter_mut().zip(&pivot_row[col..=n]) {
                    *dst -= f * src;
                }
            }
        }
    }
    Some((0..s).map(|r| a[r][n] / a[r][r]).collect())
}

fn frank_wolfe(gram: &[Vec<f64>]) -> Vec<f64> {
    let k = gram.len();
    let mut lambda = vec![1.0 / k as f64; k];
    for _ in 0..20_000 {
        let grad: Vec<f64> = (0..k).map(|i| (0..k).map(|j| gram[i][j] * lambda[j]).sum()).collect();
        let (best, _) = grad.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
        let mut dir: Vec<f64> = lambda.iter().map(|l| -l).collect();
        dir[best] += 1.0;
        let num: f64 = -(0..k).map(|i| grad[i] * dir[i]).sum::<f64>();
        let den = quad(gram, &dir);
        if num <= 1e-18 || den <= 0.0 {
            break;
        }
        let step = (num / den).min(1.0);
        for (l, d) in lambda.iter_mut().zip(&dir) {
            *l += step * d;
        }
    }
    lambda
}
