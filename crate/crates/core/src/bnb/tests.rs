use super::*;
use crate::catalog::catalog;
use crate::problem::parse_problem;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

/// `f = x` on `{x ∈ [0,1]^2 | x1 + x2 >= 1}` with coupling `x >= 0.25`, so both
/// endpoints of the efficient segment `x1 + x2 = 1` are cut away by `g`.
/// Optimum of `x1 + 2 x2` over the rest of the segment: `(0.75, 0.25)`, `h = 1.25`.
fn clipped_segment() -> BilevelProblem {
    parse_problem(
        "vars x 2\nupper x1 + 2*x2\nlower x1\nlower x2\n\
         constraint_x 1 - x1 - x2\n\
         constraint_xy 0.25 - x1\nconstraint_xy 0.25 - x2\n\
         bound x1 0 1\nbound x2 0 1\n",
    )
    .unwrap()
}

#[test]
fn config_validation() {
    assert!(cfg().validate(2).is_ok());
    let bad = [
        SolverConfig { epsilon: 0.0, ..cfg() },
        SolverConfig { direction: Some(vec![1.0, 0.0]), ..cfg() },
        SolverConfig { direction: Some(vec![1.0]), ..cfg() },
        SolverConfig { max_iterations: 0, ..cfg() },
        SolverConfig { boundary_tol: -1.0, ..cfg() },
    ];
    for c in bad {
        assert!(matches!(c.validate(2), Err(SolverError::Config(_))), "{c:?}");
    }
}

#[test]
fn initialize_disc_fixture_lower_bound() {
    let s = initialize(&catalog(4).unwrap(), &cfg()).unwrap();
    assert!((s.beta + 1.8).abs() < 1e-3, "beta0 = {}", s.beta);
    assert_eq!(s.vertices.len(), 1);
    assert!(s.terminated.is_none());
}

#[test]
fn initialize_first_fixture_from_simplex_corner() {
    let c = SolverConfig { corner: CornerRule::Simplex, ..cfg() };
    let s = initialize(&catalog(1).unwrap(), &c).unwrap();
    assert!(s.alpha.is_finite());
    assert!(s.incumbent.as_ref().is_some_and(|i| i.h == s.alpha));
    // φ(M) = min x1 + x2^2 over X, attained at (1, 0.5).
    assert!((s.beta - 1.25).abs() < 1e-3, "beta0 = {}", s.beta);
    assert!(s.beta <= s.alpha);
}

#[test]
fn initialize_with_both_boundary_problems_infeasible() {
    let p = clipped_segment();
    let s = initialize(&p, &cfg()).unwrap();
    assert_eq!(s.alpha, f64::INFINITY);
    assert!(s.incumbent.is_none());
    assert!(s.beta.is_finite());
    assert!(s.terminated.is_none());
}

#[test]
fn solve_recovers_interior_optimum_after_infinite_start() {
    let p = clipped_segment();
    let r = solve(&p, &cfg()).unwrap();
    assert_eq!(r.status, Status::Optimal);
    let inc = r.incumbent.as_ref().unwrap();
    assert!((inc.h - 1.25).abs() < 0.02 * 2.25, "{inc:?}");
    assert!(p.region().contains(&inc.x, &inc.y, 1e-6).unwrap());
    assert!(r.gap() <= 0.01 * (1.0 + r.beta.abs()) + 1e-12);
}

#[test]
fn find_feasible_y_at_reported_leader_point() {
    let p = catalog(6).unwrap();
    // x2 + x3 = 12/7, so with y2 = 0 both coupling rows reduce to y1 >= 1/7.
    let x = [0.130662, 0.156198, 1.558087];
    let y = find_feasible_y(&p, &x, None, &cfg()).unwrap().unwrap();
    assert!((y[0] - 1.0 / 7.0).abs() < 1e-3 && y[1].abs() < 1e-3, "{y:?}");
    assert!(p.region().contains(&x, &y, CERTIFY_TOL).unwrap());
}

#[test]
fn find_feasible_y_without_follower_variables() {
    let p = catalog(1).unwrap();
    assert_eq!(find_feasible_y(&p, &[1.0, 0.5], None, &cfg()).unwrap(), Some(vec![]));
    assert_eq!(find_feasible_y(&p, &[3.0, 3.0], None, &cfg()).unwrap(), None);
    let disc = catalog(4).unwrap();
    assert_eq!(find_feasible_y(&disc, &[-0.95, -0.05], None, &cfg()).unwrap(), None);
}

#[test]
fn find_feasible_y_reports_empty_slice() {
    let p = parse_problem(
        "vars x 1\nvars y 1\nupper x1 + y1\nlower x1\nlower -x1\n\
         constraint_xy y1 + 1\nbound x1 0 1\n",
    )
    .unwrap();
    assert_eq!(find_feasible_y(&p, &[0.5], None, &cfg()).unwrap(), None);
}

#[test]
fn terminated_state_is_left_alone() {
    let p = catalog(2).unwrap();
    let mut s = initialize(&p, &cfg()).unwrap();
    s.terminated = Some(Termination::Gap);
    iterate(&mut s, &p, &cfg()).unwrap();
    assert_eq!((s.k, s.log.len()), (0, 0));
    assert!(s.vertices.vertices()[0].mp.is_some());
}

#[test]
fn closed_gap_terminates_without_cutting() {
    let p = catalog(2).unwrap();
    let mut s = initialize(&p, &cfg()).unwrap();
    s.alpha = s.beta;
    let before: Vec<Vec<f64>> = s.vertices.vertices().iter().map(|v| v.z.clone()).collect();
    iterate(&mut s, &p, &cfg()).unwrap();
    assert_eq!(s.terminated, Some(Termination::Gap));
    let after: Vec<Vec<f64>> = s.vertices.vertices().iter().map(|v| v.z.clone()).collect();
    assert_eq!(before, after);
    assert_eq!(s.log.len(), 1);
    assert!(s.log[0].gap.abs() <= 1e-9);
}

#[test]
fn bounds_are_monotone_and_certified() {
    for id in [1, 2, 4] {
        let p = catalog(id).unwrap();
        let r = solve(&p, &cfg()).unwrap();
        for pair in r.log.windows(2) {
            assert!(pair[1].alpha <= pair[0].alpha + 1e-9, "fixture {id}: {pair:?}");
            assert!(pair[1].beta >= pair[0].beta - 1e-9, "fixture {id}: {pair:?}");
        }
        for row in &r.log {
            assert!(row.gap >= -1e-9 && row.alpha >= row.beta - 1e-9, "{row:?}");
        }
        assert_eq!(r.status, Status::Optimal, "fixture {id}");
        assert!(r.gap() <= 0.01 * (1.0 + r.beta.abs()) + 1e-12, "fixture {id}");
        let inc = r.incumbent.as_ref().unwrap();
        assert_eq!(inc.h, r.alpha);
        assert!(p.region().contains(&inc.x, &inc.y, 1e-6).unwrap());
    }
}

#[test]
fn runs_are_deterministic_with_parallel_evaluation() {
    let p = catalog(1).unwrap();
    let a = solve(&p, &cfg()).unwrap();
    let b = solve(&p, &cfg()).unwrap();
    let c = solve(&p, &SolverConfig { parallel: false, ..cfg() }).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.log, c.log);
    assert_eq!(a.incumbent, c.incumbent);
}

#[test]
fn iteration_cap_is_reported() {
    let p = catalog(1).unwrap();
    let c = SolverConfig { epsilon: 1e-9, max_iterations: 2, ..cfg() };
    let r = solve(&p, &c).unwrap();
    assert_eq!(r.status, Status::MaxIterations);
    assert_eq!(r.iterations, 2);
    assert_eq!(r.log.len(), 2);
}

#[test]
fn lower_bound_never_exceeds_known_optimum() {
    // Brute force over the efficient segment of the clipped toy.
    let p = clipped_segment();
    let r = solve(&p, &SolverConfig { epsilon: 1e-4, ..cfg() }).unwrap();
    let best = (0..=10_000)
        .map(|i| 0.25 + 0.5 * i as f64 / 10_000.0)
        .map(|x1| x1 + 2.0 * (1.0 - x1))
        .fold(f64::INFINITY, f64::min);
    assert!(r.beta <= best + 1e-6, "beta {} vs {best}", r.beta);
    assert!(r.alpha >= best - 1e-6, "alpha {} vs {best}", r.alpha);
}
