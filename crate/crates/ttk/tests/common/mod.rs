#![allow(dead_code)]

use std::path::PathBuf;

use ttk::cli::Fixture;
use ttk::graphs::{EdgePath, MarkedGraph, OrientedEdge};
use ttk::maps::GraphSelfMap;

pub const TOL: f64 = 1e-10;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> Fixture {
    Fixture::load(&fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn phi() -> GraphSelfMap {
    fixture("phi").map
}

pub fn phi_inv() -> GraphSelfMap {
    fixture("phi_inv").map
}

pub fn two_vertex() -> GraphSelfMap {
    fixture("two_vertex").map
}

/// Nielsen-unique representative of Φ⁴.
pub fn phi4() -> GraphSelfMap {
    fixture("phi4_nielsen_unique").map
}

/// A walk from the first direction chosen by `start`, each later step
/// picked among all directions at the current vertex (backtracking allowed).
pub fn walk(g: &MarkedGraph, start: usize, choices: &[u8]) -> EdgePath {
    let dirs: Vec<OrientedEdge> = g.directions().collect();
    let mut p = vec![dirs[start % dirs.len()]];
    for &c in choices {
        let at = g.directions_at(g.term(*p.last().unwrap()));
        p.push(at[c as usize % at.len()]);
    }
    p
}

/// All tight edge paths with `1..=max_len` edges.
pub fn tight_paths(g: &MarkedGraph, max_len: usize) -> Vec<EdgePath> {
    let mut out = Vec::new();
    let mut stack: Vec<EdgePath> = g.directions().map(|d| vec![d]).collect();
    while let Some(p) = stack.pop() {
        if p.len() < max_len {
            let last = *p.last().unwrap();
            for d in g.directions_at(g.term(last)) {
                if d != last.rev() {
                    let mut q = p.clone();
                    q.push(d);
                    stack.push(q);
                }
            }
        }
        out.push(p);
    }
    out
}
