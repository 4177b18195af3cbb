//! Inverting Φ by Stallings folding and checking the result against the
//! displayed inverse up to an inner automorphism.

use ttk::folds::{invert_automorphism, is_inverse_pair};
use ttk::maps::GraphSelfMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phi = GraphSelfMap::rose(&[("A", "A C"), ("B", "A"), ("C", "B")])?;
    let inv = invert_automorphism(&phi)?;
    for e in 0..3 {
        println!("{} -> {}", inv.graph().edge_name(e), inv.graph().format_path(inv.edge_image(e)));
    }
    let displayed = GraphSelfMap::rose(&[("A", "B"), ("B", "C"), ("C", "~B A")])?;
    match is_inverse_pair(&phi, &displayed)? {
        Some(w) => println!("inverse pair; conjugator `{}`", w.format(phi.graph())),
        None => println!("not an inverse pair"),
    }
    // Composing with an inner automorphism changes only the conjugator.
    let twisted = GraphSelfMap::rose(&[("A", "C B ~C"), ("B", "C"), ("C", "C ~B A ~C")])?;
    if let Some(w) = is_inverse_pair(&phi, &twisted)? {
        println!("twisted inverse; conjugator `{}`", w.format(phi.graph()));
    }
    Ok(())
}
