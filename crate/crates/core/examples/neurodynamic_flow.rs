//! Minimise x1^2 + x2^2 subject to x1 + x2 >= 1 with the neurodynamic flow
//! from several starts, feasible or not. Every run lands on (0.5, 0.5).

use neurobilevel::expr::parse_expression;
use neurobilevel::neurodynamic::{penalty, solve_flow, FlowConfig, Oracle};
use neurobilevel::problem::Function;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let names = ["x1", "x2"];
    let objective = Function::new(parse_expression("x1^2 + x2^2", &names)?);
    let row = Function::new(parse_expression("1 - x1 - x2", &names)?);
    let rows: Vec<&dyn Oracle> = vec![&row];
    let cfg = FlowConfig::default();

    println!("{:>16}  {:>8}  {:>20}  {:>10}  {:>6}", "start", "S(x0)", "x*", "r(x*)", "steps");
    for start in [[3.0, 3.0], [-2.0, 0.0], [0.0, 5.0], [10.0, -4.0]] {
        let r = solve_flow(&objective, &rows, &start, &cfg)?;
        println!(
            "{:>16}  {:>8.3}  {:>20}  {:>10.6}  {:>6}  {:?}",
            format!("{start:?}"),
            penalty(&start, &rows)?,
            format!("({:.4}, {:.4})", r.x_final[0], r.x_final[1]),
            r.objective_value,
            r.steps,
            r.status
        );
    }
    Ok(())
}
