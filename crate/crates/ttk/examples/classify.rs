//! The geometric / parageometric / neither trichotomy on the shipped
//! fixtures.

use std::path::Path;

use ttk::cli::Fixture;
use ttk::nielsen::{classify, DEFAULT_MAX_BACK};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    for name in ["two_vertex", "phi_inv", "phi4_nielsen_unique", "phi"] {
        let fx = Fixture::load(&dir.join(format!("{name}.json")))?;
        let c = classify(&fx.map, 8, DEFAULT_MAX_BACK, 1e-10);
        println!("{name}: {:?}", c.verdict);
        for s in &c.statements {
            println!("  {s}");
        }
    }
    Ok(())
}
