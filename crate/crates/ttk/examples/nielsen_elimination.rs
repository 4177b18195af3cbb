//! Pulling illegal length-two paths back through the fold factorization
//! until nothing survives: the two-vertex example has no periodic Nielsen
//! paths.

use std::collections::BTreeMap;

use ttk::graphs::MarkedGraph;
use ttk::maps::GraphSelfMap;
use ttk::nielsen::{nielsen_elimination, EliminationOutcome, DEFAULT_MAX_BACK};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = MarkedGraph::new(vec!["q", "r"], vec![("B", "q", "r"), ("C", "r", "q"), ("D", "r", "q"), ("E", "q", "q")])?;
    let edges: BTreeMap<String, String> = [("B", "C ~E ~C D E"), ("C", "~C ~B ~E ~D"), ("D", "B"), ("E", "C B")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let m = GraphSelfMap::from_tokens(g, &BTreeMap::new(), &edges)?;

    let e = nielsen_elimination(&m, DEFAULT_MAX_BACK, 1e-10)?;
    let start: Vec<String> = e.initial.iter().map(|p| m.graph().format_path(p)).collect();
    println!("E0 = {{{}}}", start.join(", "));
    println!("set sizes: {:?}", e.sizes);
    match e.outcome {
        EliminationOutcome::Empty => println!("no periodic Nielsen paths (emptied after {} steps)", e.steps),
        other => println!("{other:?} after {} steps", e.steps),
    }
    Ok(())
}
