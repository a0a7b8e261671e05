//! Parse an objective, evaluate it and take forward-mode (sub)gradients,
//! including the Clarke bundle at a kink of a `max`.

use neurobilevel::expr::{clarke_subgradient, evaluate, parse_expression};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let names = ["x1", "x2"];
    let f = parse_expression("max(-0.5*x1 - 0.25*x2 - 0.2, -2*x1 + 4.6*x2 - 5.8)", &names)?;
    let tape = f.compile();
    println!("f = {}", f.source(&names));

    for x in [[1.0, 0.5], [2.0, 1.0]] {
        let (v, g) = tape.value_grad(&x, 1e-9)?;
        println!("f{x:?} = {v:.6}, selected subgradient {g:?}");
        assert_eq!(v, evaluate(&f, &x)?);
    }

    // Both branches equal -1.32 at (1.44, 1.6): the bundle holds both gradients.
    let kink = [1.44, 1.6];
    let b = clarke_subgradient(&f, &kink, 1e-9)?;
    println!("at the kink {kink:?}: active branches {:?}", b.active_indices);
    for g in &b.generators {
        println!("  generator {g:?}");
    }
    println!("  uniform selection {:?}", b.selection);

    let ratio = parse_expression("(x1^2 + 2*x2^2)/(x1 + x2 + 20)", &names)?.compile();
    let (v, g) = ratio.value_grad(&[0.3, 0.7], 0.0)?;
    println!("ratio at (0.3, 0.7) = {v:.6}, gradient ({:.6}, {:.6})", g[0], g[1]);
    Ok(())
}
