//! Wedge-model combinatorics of the Nielsen-unique representative of Φ⁴:
//! dihedral valences, the non-free subgraph G₁ and its growth λ′, and leaf
//! graphs of the stable foliation.

use std::path::Path;

use ttk::cli::Fixture;
use ttk::nielsen::classify;
use ttk::wedge::{brute_force_walks, build_wedge, i1_preimage_count, leaf_graph, nonfree_subgraph, DEFAULT_DEPTH};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/phi4_nielsen_unique.json");
    let fx = Fixture::load(&path)?;
    let m = &fx.map;
    let g = m.graph();
    let c = classify(m, 4, 64, 1e-10);
    let rho = c.inp.ok_or("no indivisible Nielsen path")?;
    let w = build_wedge(m, &rho, 1e-10)?;
    for e in 0..g.edge_count() {
        println!("{:>5}: valence {}", g.edge_name(e), w.valence[e]);
    }
    let sub = nonfree_subgraph(&w, 1e-10)?;
    println!("G₁ = {{{}}}, λ′ = {:.9} < λ = {:.9}", sub.edges.join(", "), sub.lambda_prime, w.lambda);
    let e = &sub.edges[0];
    let counts: Vec<u128> = (0..=6).map(|n| i1_preimage_count(&sub, e, n)).collect::<Result<_, _>>()?;
    let walks: Vec<u128> = (0..=6).map(|n| brute_force_walks(&sub.matrix, 0, n)).collect();
    println!("preimages of {e} in G₁: {counts:?} (walks {walks:?})");
    let e0 = sub.edge_ids[0];
    let lg = leaf_graph(&w, e0, 0.4 * w.lengths[e0], DEFAULT_DEPTH)?;
    println!(
        "leaf graph: {} points, {} segments, acyclic {}, valences agree {}",
        lg.points.len(),
        lg.segments.len(),
        lg.acyclic,
        lg.valences_agree()
    );
    Ok(())
}
