//! Inner copolyblock refinement by cutting cones: a vertex is replaced by its
//! one-coordinate moves to a frontier point, and dominated vertices are pruned.

use neurobilevel::copolyblock::{VertexSet, VERTEX_TOL};

fn show(label: &str, s: &VertexSet) {
    let pts: Vec<String> = s.vertices().iter().map(|v| format!("#{} {:?}", v.id, v.z)).collect();
    println!("{label:<28} {}", pts.join("  "));
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Frontier of the unit simplex: z1 + z2 = 1 inside [0, 1]^2.
    let mut s = VertexSet::new(vec![0.0, 0.0], vec![1.0, 1.0]);
    show("start", &s);
    s.cut(0, &[0.5, 0.5], VERTEX_TOL)?;
    show("cut #0 at (0.5, 0.5)", &s);
    s.cut(1, &[0.25, 0.75], VERTEX_TOL)?;
    show("cut #1 at (0.25, 0.75)", &s);
    s.cut(2, &[0.75, 0.25], VERTEX_TOL)?;
    show("cut #2 at (0.75, 0.25)", &s);
    // A frontier point on the lower boundary only spawns the other child.
    s.cut(3, &[0.0, 1.0], VERTEX_TOL)?;
    show("cut #3 at (0, 1)", &s);

    s.insert(vec![0.9, 0.9]);
    show("insert a dominated vertex", &s);
    s.prune();
    show("prune", &s);
    Ok(())
}
