//! Outcome-space scaffolding on built-in example 1: the box [m, M], the ray
//! scalarization that lands on the weakly nondominated frontier, and the
//! value function phi(z) along a chain towards the ideal point.

use neurobilevel::catalog::catalog;
use neurobilevel::neurodynamic::FlowConfig;
use neurobilevel::outcome::{compute_box, solve_mp, solve_ray, CornerRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = catalog(1)?;
    let cfg = FlowConfig::default();
    let b = compute_box(&problem, &cfg)?;
    println!("ideal point m   = {:.4?}", b.lower);
    println!("simplex corner  = {:.4?}", b.upper);
    println!("payoff nadir    = {:.4?}", b.nadir);

    let corner = b.corner(CornerRule::Auto).to_vec();
    for d in [[1.0, 1.0], [1.0, 3.0], [3.0, 1.0]] {
        let ray = solve_ray(&problem, &corner, &d, &cfg, None)?;
        let f = problem.outcome(&ray.x)?;
        println!("ray d = {d:?}: t = {:.4}, w = {:.4?}, f(x) = {:.4?}", ray.t, ray.w, f);
    }

    println!("phi along the segment from the corner to m:");
    for s in [1.0, 0.8, 0.6, 0.4, 0.2, 0.0] {
        let z: Vec<f64> = (0..2).map(|i| b.lower[i] + s * (corner[i] - b.lower[i])).collect();
        let mp = solve_mp(&problem, &z, &cfg, None)?;
        if mp.feasible {
            println!("  z = {z:.4?}: phi = {:.6} at x = {:.4?}", mp.phi, mp.x);
        } else {
            println!("  z = {z:.4?}: MP(z) infeasible");
        }
    }
    Ok(())
}
