//! Solve all six built-in examples and compare with their recorded optima.

use neurobilevel::bnb::{solve, SolverConfig};
use neurobilevel::catalog::{catalog, EXAMPLE_COUNT};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "{:>2}  {:>10}  {:>10}  {:>10}  {:>10}  {:>5}  {:>9}  status",
        "ex", "h*", "beta", "gap", "known", "iters", "time"
    );
    for id in 1..=EXAMPLE_COUNT {
        let problem = catalog(id)?;
        let r = solve(&problem, &SolverConfig::default())?;
        let known = problem.known().and_then(|k| k.h).map_or("-".into(), |h| format!("{h:.6}"));
        println!(
            "{id:>2}  {:>10.6}  {:>10.6}  {:>10.6}  {known:>10}  {:>5}  {:>8.3}s  {:?}/{:?}",
            r.alpha,
            r.beta,
            r.gap(),
            r.iterations,
            r.wall_time.as_secs_f64(),
            r.status,
            r.termination
        );
    }
    Ok(())
}
