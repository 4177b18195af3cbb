//! Perron–Frobenius data for Φ and Φ⁻¹, cross-checked against the largest
//! real root of the characteristic polynomial.

use ttk::maps::GraphSelfMap;
use ttk::spectral::{charpoly, eigen_metric, largest_real_root, pf_eigen, transition_matrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = 1e-10;
    for (name, images) in
        [("Φ", [("A", "A C"), ("B", "A"), ("C", "B")]), ("Φ⁻¹", [("A", "B"), ("B", "C"), ("C", "~B A")])]
    {
        let m = GraphSelfMap::rose(&images)?;
        let mt = transition_matrix(&m);
        let pf = pf_eigen(&mt, tol)?;
        let p = charpoly(&mt);
        println!("{name}: λ = {:.9}  (charpoly {:?}, root {:.9})", pf.lambda, p, largest_real_root(&p, tol));
        let metric = eigen_metric(&m, tol)?;
        for (e, l) in metric.lengths.iter().enumerate() {
            println!("  ℓ({}) = {l:.9}", m.graph().edge_name(e));
        }
        println!("  stretch residual {:.1e}", metric.max_stretch_residual);
    }
    Ok(())
}
