//! Expansion factors from word growth, ‖φⁿ(c)‖ over cyclic words, for Φ and
//! its inverse.

use ttk::folds::invert_automorphism;
use ttk::maps::GraphSelfMap;
use ttk::words::{default_seeds, growth_rate, FreeWord, DEFAULT_LENGTH_CAP};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phi = GraphSelfMap::rose(&[("A", "A C"), ("B", "A"), ("C", "B")])?;
    let inv = invert_automorphism(&phi)?;
    let seeds = default_seeds(3);
    for (name, m) in [("φ", &phi), ("φ⁻¹", &inv)] {
        let est = growth_rate(m, &seeds, 24, DEFAULT_LENGTH_CAP)?;
        println!("{name}: growth ≈ {:.6} over {} seeds", est.estimate, est.seeds.len());
    }
    let w = FreeWord::parse(phi.graph(), "~A B A")?;
    println!("cyclic reduction of ~A B A: {}", w.cyclic_reduce().format(phi.graph()));
    Ok(())
}
