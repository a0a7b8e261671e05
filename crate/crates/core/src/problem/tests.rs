use super::*;
use crate::catalog::catalog;
use crate::expr::evaluate;

#[test]
fn first_fixture_dimensions() {
    let p = catalog(1).unwrap();
    assert_eq!((p.n(), p.m(), p.p(), p.l()), (2, 0, 2, 0));
    assert_eq!(p.declared_constraints(), 6);
    // Two extra rows from x >= 0.
    assert_eq!(p.q(), 8);
}

#[test]
fn sixth_fixture_dimensions() {
    let p = catalog(6).unwrap();
    assert_eq!((p.n(), p.m(), p.p(), p.l()), (3, 2, 4, 2));
    assert_eq!(p.declared_constraints(), 4);
}

#[test]
fn empty_and_malformed_files_fail_with_line_numbers() {
    assert!(matches!(parse_problem(""), Err(ProblemError::Format { .. })));
    let cases = [
        ("vars x 1\nupper x1\nlower x1\nfrobnicate 3\n", 4),
        ("vars x 1\nupper x1 +\nlower x1\n", 2),
        ("vars x 1\nupper x1\nlower x2\n", 3),
        ("vars x 1\n\n# c\nupper x1\nlower x1\nbound x1 2 1\n", 6),
        ("vars x 1\nvars x 2\n", 2),
        ("vars x 1\nupper x1\nlower x1\nknown x 1 2\n", 4),
    ];
    for (text, line) in cases {
        match parse_problem(text) {
            Err(ProblemError::Format { line: l, .. }) | Err(ProblemError::Expr { line: l, .. }) => {
                assert_eq!(l, line, "{text:?}")
            }
            other => panic!("{text:?}: {other:?}"),
        }
    }
    assert!(matches!(parse_problem("vars x 1\nlower x1\n"), Err(ProblemError::Format { .. })));
    assert!(matches!(load_problem("/nonexistent/problem.txt"), Err(ProblemError::Io { .. })));
}

#[test]
fn known_block_is_parsed_but_separate() {
    let p = catalog(5).unwrap();
    let k = p.known().unwrap();
    assert_eq!(k.h, Some(0.5));
    assert_eq!(k.x.as_ref().unwrap()[0], 0.5);
    assert!(catalog(1).unwrap().known().is_none());
}

#[test]
fn source_round_trip_preserves_expressions() {
    for id in 1..=6 {
        let p = catalog(id).unwrap();
        let q = parse_problem(&p.to_source()).unwrap();
        assert_eq!(p.upper().expr(), q.upper().expr());
        for (a, b) in p.lower().iter().zip(q.lower()) {
            assert_eq!(a.expr(), b.expr());
        }
        for (a, b) in p.x_rows().iter().zip(q.x_rows()) {
            assert_eq!(a.func.expr(), b.func.expr());
            assert_eq!(a.source, b.source);
        }
        assert_eq!(p.g_rows().len(), q.g_rows().len());
    }
}

#[test]
fn validate_accepts_first_fixture_with_assumption_warning_only() {
    let d = validate(&catalog(1).unwrap()).unwrap();
    let warnings: Vec<_> = d.iter().filter(|d| d.severity == Severity::Warning).collect();
    assert_eq!(warnings.len(), 1, "{d:?}");
    assert!(warnings[0].message.contains("assumed"));
}

#[test]
fn validate_rejects_scalar_lower_level() {
    let p = parse_problem("vars x 1\nupper x1\nlower x1\nconstraint_x x1 - 1\n").unwrap();
    match validate(&p) {
        Err(ProblemError::Invalid(msg)) => assert_eq!(msg, "lower level must be vectorial (p ≥ 2)"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn validate_rejects_y_in_lower_level() {
    let p = parse_problem("vars x 1\nvars y 1\nupper x1\nlower x1 + y1\nlower x1\n").unwrap();
    assert!(matches!(validate(&p), Err(ProblemError::Invalid(_))));
    let p = parse_problem("vars x 1\nvars y 1\nupper x1\nlower x1\nlower -x1\nconstraint_x y1\n").unwrap();
    assert!(matches!(validate(&p), Err(ProblemError::Invalid(_))));
}

#[test]
fn validate_flags_unbounded_halfline() {
    // X = {x1 <= 0}: min x1 is unbounded below.
    let p = parse_problem("vars x 1\nupper x1\nlower x1\nlower -x1\nconstraint_x x1\n").unwrap();
    let d = validate(&p).unwrap();
    assert!(
        d.iter().any(|d| d.severity == Severity::Warning && d.message.contains("x1 is not bounded below")),
        "{d:?}"
    );
    assert!(!d.iter().any(|d| d.message.contains("not bounded above")), "{d:?}");
}

#[test]
fn validate_flags_empty_region() {
    let p =
        parse_problem("vars x 1\nupper x1\nlower x1\nlower -x1\nconstraint_x x1 + 1\nconstraint_x 1 - x1\n").unwrap();
    let d = validate(&p).unwrap();
    assert!(d.iter().any(|d| d.message.contains("empty")), "{d:?}");
}

#[test]
fn stacked_constraints_first_fixture() {
    let p = catalog(1).unwrap();
    let z = [6.0, 5.0];
    let rows = p.stacked_mp_constraints(&z).unwrap();
    assert_eq!(rows.len(), 8 + 2);
    let sources: Vec<RowSource> = rows.iter().map(|r| r.source).collect();
    let mut expected: Vec<RowSource> = (0..6).map(RowSource::Lower).collect();
    expected.extend([RowSource::LowerBound(0), RowSource::LowerBound(1)]);
    expected.extend([RowSource::Outcome(0), RowSource::Outcome(1)]);
    assert_eq!(sources, expected);
    let x = [1.0, 0.8];
    let f = p.outcome(&x).unwrap();
    for i in 0..2 {
        let v = rows[8 + i].func.eval(&x).unwrap();
        assert!((v - (f[i] - z[i])).abs() < 1e-15);
        assert!(v <= 0.0);
    }
}

#[test]
fn stacked_constraints_sixth_fixture_order() {
    let p = catalog(6).unwrap();
    let rows = p.stacked_mp_constraints(&[2.0; 4]).unwrap();
    assert_eq!(rows.len(), 7 + 2 + 4 + 2);
    let mut expected: Vec<RowSource> = (0..4).map(RowSource::Lower).collect();
    expected.extend((0..3).map(RowSource::LowerBound));
    expected.extend((0..2).map(RowSource::Nonnegative));
    expected.extend((0..4).map(RowSource::Outcome));
    expected.extend((0..2).map(RowSource::Coupling));
    assert_eq!(rows.iter().map(|r| r.source).collect::<Vec<_>>(), expected);
    let u = [0.1, 0.2, 0.3, 0.4, 0.5];
    assert_eq!(rows[7].func.eval(&u).unwrap(), -0.4);
    assert_eq!(rows[8].func.eval(&u).unwrap(), -0.5);
    assert!(matches!(p.stacked_mp_constraints(&[1.0; 3]), Err(ProblemError::Dimension(_))));
}

/// Direct membership test from the fixture's expressions and bounds.
fn member_direct(p: &BilevelProblem, u: &[f64], tol: f64) -> bool {
    let n = p.n();
    let rows_ok = p
        .x_rows()
        .iter()
        .filter(|r| matches!(r.source, RowSource::Lower(_)))
        .chain(p.g_rows().iter().filter(|r| matches!(r.source, RowSource::Coupling(_))))
        .all(|r| evaluate(r.func.expr(), u).unwrap() <= tol);
    let bounds_ok = p.bounds().iter().all(|b| u[b.var] >= b.lo - tol && u[b.var] <= b.hi + tol);
    let y_ok = u[n..].iter().all(|v| *v >= -tol);
    rows_ok && bounds_ok && y_ok
}

#[test]
fn region_membership_agrees_with_direct_evaluation_on_grid() {
    let tol = 1e-9;
    for id in [1, 2, 3, 4] {
        let p = catalog(id).unwrap();
        let dims = p.n() + p.m();
        assert!(dims <= 4);
        let region = p.region();
        let lo = -1.5;
        let hi = 3.5;
        let k = 20usize;
        let total = k.pow(dims as u32);
        let mut inside = 0;
        for idx in 0..total {
            let mut rem = idx;
            let u: Vec<f64> = (0..dims)
                .map(|_| {
                    let i = rem % k;
                    rem /= k;
                    lo + (hi - lo) * i as f64 / (k - 1) as f64
                })
                .collect();
            let (x, y) = u.split_at(p.n());
            let a = region.contains(x, y, tol).unwrap();
            assert_eq!(a, member_direct(&p, &u, tol), "fixture {id} at {u:?}");
            inside += a as usize;
        }
        assert!(inside > 0, "fixture {id} grid misses G");
    }
}
