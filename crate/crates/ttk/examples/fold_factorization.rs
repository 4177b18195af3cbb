//! Stallings fold factorization of the two-vertex example, replayed from its
//! serialized form.

use std::collections::BTreeMap;

use ttk::folds::{fold_factorization, verify_factorization, verify_report, Stage};
use ttk::graphs::MarkedGraph;
use ttk::maps::GraphSelfMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = MarkedGraph::new(vec!["q", "r"], vec![("B", "q", "r"), ("C", "r", "q"), ("D", "r", "q"), ("E", "q", "q")])?;
    let edges: BTreeMap<String, String> = [("B", "C ~E ~C D E"), ("C", "~C ~B ~E ~D"), ("D", "B"), ("E", "C B")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let m = GraphSelfMap::from_tokens(g, &BTreeMap::new(), &edges)?;

    let seq = fold_factorization(&m)?;
    println!("{} stages: {} folds, {} subdivisions", seq.len(), seq.fold_count(), seq.subdivision_count());
    for st in &seq.stages {
        match st {
            Stage::Subdivide { edge, parts, .. } => println!("  subdivide {edge} -> {} {}", parts[0], parts[1]),
            Stage::Fold { keep, drop } => println!("  fold {drop} onto {keep}"),
        }
    }
    println!("composite equals g: {}", verify_factorization(&seq, &m));
    let json = serde_json::to_string(&seq.to_report())?;
    let back = serde_json::from_str(&json)?;
    println!("serialized report replays: {}", verify_report(&back, &m)?);
    Ok(())
}
