//! Indivisible Nielsen paths of Φ⁴: subdivide at fixed points, search by
//! extending rays from illegal turns, then collapse the shorter path to get a
//! Nielsen-unique representative.

use ttk::maps::GraphSelfMap;
use ttk::nielsen::{classify, collapse_inp, inp_rays, subdivide_fixed};
use ttk::spectral::metric_unchecked;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phi = GraphSelfMap::rose(&[("A", "A C"), ("B", "A"), ("C", "B")])?;
    let sub = subdivide_fixed(&phi.power(4)?)?;
    let h = &sub.map;
    let em = metric_unchecked(h, 1e-10)?;
    let cap = em.lengths.iter().sum::<f64>() * (1.0 + 1e-6);
    let mut inps = inp_rays(h, &em.lengths, em.lambda, cap);
    inps.sort_by(|a, b| a.length.total_cmp(&b.length));
    println!("Φ⁴ subdivided: {} edges, λ = {:.9}", h.graph().edge_count(), em.lambda);
    for p in &inps {
        println!("  ρ = {}  (length {:.6})", h.graph().format_path(&p.path), p.length);
    }
    let rep = collapse_inp(h, &em.lengths, em.lambda, &inps[0])?;
    let c = classify(&rep, 4, 64, 1e-10);
    println!("after collapsing the shorter path: {} edges, {:?}", rep.graph().edge_count(), c.verdict);
    Ok(())
}
