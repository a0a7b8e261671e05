//! Define a problem in the text format, validate it, solve it and print the
//! iteration table the command-line tool would print.

use neurobilevel::bnb::{solve, SolverConfig};
use neurobilevel::cli::write_table;
use neurobilevel::problem::{parse_problem, validate};

const PROBLEM: &str = "\
# The follower's efficient set is the lower-left arc of the unit disc. The
# leader wants the arc point nearest (-0.6, -0.2): h* = (1 - sqrt(0.4))^2.
vars x 2
upper (x1 + 0.6)^2 + (x2 + 0.2)^2
lower x1
lower x2
constraint_x x1^2 + x2^2 - 1
bound x1 -1 1
bound x2 -1 1
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = parse_problem(PROBLEM)?;
    for d in validate(&problem)? {
        eprintln!("{d}");
    }
    let cfg = SolverConfig { epsilon: 1e-3, ..SolverConfig::default() };
    let report = solve(&problem, &cfg)?;
    write_table(&mut std::io::stdout(), "disc arc", &problem, &report)?;
    println!("exact       {:.6}", (1.0 - 0.4f64.sqrt()).powi(2));
    Ok(())
}
