//! Built-in fixture problems 1 to 6.
//!
//! Each fixture is a problem file compiled into the binary; see
//! `fixtures/exampleN.txt` for the sources.

use thiserror::Error;

use crate::problem::{parse_problem, BilevelProblem};

pub const EXAMPLE_COUNT: usize = 6;

const SOURCES: [&str; EXAMPLE_COUNT] = [
    include_str!("../fixtures/example1.txt"),
    include_str!("../fixtures/example2.txt"),
    include_str!("../fixtures/example3.txt"),
    include_str!("../fixtures/example4.txt"),
    include_str!("../fixtures/example5.txt"),
    include_str!("../fixtures/example6.txt"),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no built-in example {0}; choose 1 to {EXAMPLE_COUNT}")]
pub struct CatalogError(pub usize);

/// Problem-file text of fixture `id`.
pub fn catalog_source(id: usize) -> Result<&'static str, CatalogError> {
    id.checked_sub(1).and_then(|i| SOURCES.get(i)).copied().ok_or(CatalogError(id))
}

pub fn catalog(id: usize) -> Result<BilevelProblem, CatalogError> {
    let src = catalog_source(id)?;
    Ok(parse_problem(src).expect("built-in fixtures parse"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::evaluate;

    #[test]
    fn every_fixture_parses() {
        for id in 1..=EXAMPLE_COUNT {
            assert!(parse_problem(catalog_source(id).unwrap()).is_ok(), "fixture {id}");
        }
        assert_eq!(catalog(7).unwrap_err(), CatalogError(7));
        assert_eq!(catalog(0).unwrap_err(), CatalogError(0));
    }

    #[test]
    fn disc_fixture_shape() {
        let p = catalog(4).unwrap();
        assert_eq!((p.n(), p.m(), p.p(), p.l()), (2, 0, 2, 1));
        let g = &p.g_rows()[0].func;
        for x in [[0.3, -0.4], [0.9, 0.0], [-1.0, 1.0]] {
            assert!((g.eval(&x).unwrap() - (x[0] * x[0] + x[1] * x[1] - 0.81)).abs() < 1e-15);
        }
        // X = [-1, 1]^2 ∩ {x1 + x2 + 1 >= 0}.
        assert_eq!(p.q(), 5);
        assert!(p.x_violation(&[-0.5, -0.4]).unwrap() <= 0.0);
        assert!(p.x_violation(&[-0.6, -0.5]).unwrap() > 0.0);
        assert!(p.x_violation(&[1.2, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn fourteen_dimensional_fixture_shape() {
        let p = catalog(5).unwrap();
        assert_eq!((p.n(), p.p()), (14, 2));
        let x: Vec<f64> = (0..14).map(|i| 0.1 * i as f64 - 0.3).collect();
        let tail: f64 = x[1..].iter().map(|v| v * v).sum();
        let f = p.outcome(&x).unwrap();
        assert!((f[0] - (x[0] * x[0] + tail)).abs() < 1e-12);
        assert!((f[1] - ((x[0] - 0.5) * (x[0] - 0.5) + tail)).abs() < 1e-12);
        assert_eq!(p.bounds().len(), 14);
        assert!(p.bounds().iter().all(|b| b.lo == -1.0 && b.hi == 2.0));
    }

    #[test]
    fn fractional_objectives_evaluate_as_written() {
        let p = catalog(6).unwrap();
        let u = [0.2, 0.3, 1.1, 0.5, 0.25];
        let (x1, x2, x3, y1, y2) = (u[0], u[1], u[2], u[3], u[4]);
        let h = (x1 * x1 + 2.0 * x2 * x2 + 10.0 * y1 * y1 + y2 * y2) / (x1 + x3 + y1 + 20.0);
        assert!((evaluate(p.upper().expr(), &u).unwrap() - h).abs() < 1e-15);
        let f3 = (x1 + 2.0 * x2 + 5.0 * x3 + 10.0) / (x1 + 5.0 * x2 + 5.0 * x3 + 10.0);
        assert!((p.outcome(&u[..3]).unwrap()[2] - f3).abs() < 1e-15);
    }
}
