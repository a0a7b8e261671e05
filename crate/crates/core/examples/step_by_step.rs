//! Drive the branch-and-bound loop by hand: initialise, then iterate while
//! watching the vertex set and both bounds.

use neurobilevel::bnb::{initialize, iterate, SolverConfig};
use neurobilevel::catalog::catalog;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = catalog(4)?;
    let cfg = SolverConfig::default();
    let mut state = initialize(&problem, &cfg)?;
    println!("box m = {:?}, corner = {:?}", state.outcome_box.lower, state.vertices.vertices()[0].z);
    println!("k = 0: alpha = {}, beta = {:.6}", state.alpha, state.beta);
    while state.terminated.is_none() && state.k < 20 {
        iterate(&mut state, &problem, &cfg)?;
        if let Some(row) = state.log.last().filter(|r| r.k == state.k) {
            println!(
                "k = {}: v = {:.6?}, alpha = {:.6}, beta = {:.6}, |V| = {}",
                row.k,
                row.v,
                row.alpha,
                row.beta,
                state.vertices.len()
            );
        }
    }
    println!("terminated: {:?}", state.terminated);
    if let Some(inc) = &state.incumbent {
        println!("x* = {:.6?}, h* = {:.6}", inc.x, inc.h);
    }
    Ok(())
}
