//! The whole pipeline for Φ: find a Nielsen-unique parageometric
//! representative of a power, then check λ(φ⁻¹) ≤ λ′ < λ(φ).

use ttk::maps::GraphSelfMap;
use ttk::wedge::{derive_parageometric, verify_gap, InverseEvidence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phi = GraphSelfMap::rose(&[("A", "A C"), ("B", "A"), ("C", "B")])?;
    let inv = GraphSelfMap::rose(&[("A", "B"), ("B", "C"), ("C", "~B A")])?;
    let d = derive_parageometric(&phi, 24, 64, 1e-10)?;
    println!("Nielsen-unique representative of φ^{} on {} edges", d.power, d.map.graph().edge_count());
    let evidence = InverseEvidence::Representative(inv);
    let (report, _, _) = verify_gap(&d.map, d.power, &d.classification, Some(&evidence), 1e-10)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
