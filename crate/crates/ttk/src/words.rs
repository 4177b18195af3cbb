//! Free-group words over the petals of a rose, automorphism application and
//! the word-growth estimate of expansion factors.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{reduce_steps, EdgePath, GraphError, MarkedGraph, OrientedEdge};
use crate::maps::{GraphSelfMap, MapError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WordError {
    #[error("word uses generator #{generator} but the rank is {rank}")]
    RankMismatch { generator: usize, rank: usize },
    #[error("seed `{0}` is trivial")]
    TrivialSeed(String),
    #[error("growth needs N >= 2 and at least one seed")]
    BadRequest,
    #[error("expected a map on a rose")]
    NotRose,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// A word in the generators; letter `OrientedEdge { edge: i, forward }` is
/// generator `i` or its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FreeWord(pub Vec<OrientedEdge>);

impl FreeWord {
    pub fn empty() -> Self {
        FreeWord(Vec::new())
    }

    pub fn generator(i: usize) -> Self {
        FreeWord(vec![OrientedEdge::fwd(i)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reduce(&self) -> FreeWord {
        FreeWord(reduce_steps(&self.0))
    }

    /// Shortest word in the conjugacy class (of the reduced word).
    pub fn cyclic_reduce(&self) -> FreeWord {
        let w = reduce_steps(&self.0);
        let (mut i, mut j) = (0, w.len());
        while j >= i + 2 && w[i] == w[j - 1].rev() {
            i += 1;
            j -= 1;
        }
        FreeWord(w[i..j].to_vec())
    }

    pub fn inverse(&self) -> FreeWord {
        FreeWord(self.0.iter().rev().map(|o| o.rev()).collect())
    }

    /// Reduced product.
    pub fn mul(&self, other: &FreeWord) -> FreeWord {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        FreeWord(reduce_steps(&v))
    }

    pub fn parse(rose: &MarkedGraph, s: &str) -> Result<FreeWord, WordError> {
        let letters = s.split_whitespace().map(|t| rose.parse_oriented(t)).collect::<Result<Vec<_>, _>>()?;
        Ok(FreeWord(letters))
    }

    pub fn format(&self, rose: &MarkedGraph) -> String {
        rose.format_path(&self.0)
    }
}

/// Substitutes generator images and reduces.
pub fn apply_automorphism(phi: &GraphSelfMap, w: &FreeWord) -> Result<FreeWord, WordError> {
    if !phi.is_rose() {
        return Err(WordError::NotRose);
    }
    let rank = phi.graph().edge_count();
    if let Some(bad) = w.0.iter().find(|o| o.edge >= rank) {
        return Err(WordError::RankMismatch { generator: bad.edge, rank });
    }
    Ok(FreeWord(phi.apply(&w.0)))
}

/// All generators and all products of two distinct generators.
pub fn default_seeds(rank: usize) -> Vec<FreeWord> {
    let mut seeds: Vec<FreeWord> = (0..rank).map(FreeWord::generator).collect();
    for i in 0..rank {
        for j in i + 1..rank {
            seeds.push(FreeWord(vec![OrientedEdge::fwd(i), OrientedEdge::fwd(j)]));
        }
    }
    seeds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedGrowth {
    pub seed: String,
    /// Cyclic lengths `‖φⁿ(c)‖` for n = 0, 1, ….
    pub lengths: Vec<u64>,
    /// `‖φⁿ(c)‖^{1/n}` for n ≥ 1.
    pub roots: Vec<f64>,
    pub ratio: f64,
    /// Last exponent actually computed (below N if the length cap hit).
    pub reached: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub estimate: f64,
    pub requested: usize,
    pub seeds: Vec<SeedGrowth>,
    /// Set when the ratio sequence of the winning seed is not monotone over
    /// its last few terms, or the length cap truncated the iteration.
    pub non_monotone: bool,
    pub truncated: bool,
}

pub const DEFAULT_LENGTH_CAP: usize = 4_000_000;

/// Ratio estimate `(‖φ^N(c)‖ / ‖φ^{N−2}(c)‖)^{1/2}`, maximized over seeds. Iteration
/// stops early once a word exceeds `length_cap` letters.
pub fn growth_rate(
    phi: &GraphSelfMap,
    seeds: &[FreeWord],
    n: usize,
    length_cap: usize,
) -> Result<GrowthEstimate, WordError> {
    if n < 2 || seeds.is_empty() {
        return Err(WordError::BadRequest);
    }
    let mut out = Vec::new();
    let mut truncated = false;
    for s in seeds {
        let mut w = s.cyclic_reduce();
        if w.is_empty() {
            return Err(WordError::TrivialSeed(s.format(phi.graph())));
        }
        let mut lengths = vec![w.len() as u64];
        let mut reached = 0;
        for k in 1..=n {
            if w.len() > length_cap {
                truncated = true;
                break;
            }
            w = apply_automorphism(phi, &w)?.cyclic_reduce();
            lengths.push(w.len() as u64);
            reached = k;
        }
        let roots = (1..lengths.len()).map(|k| (lengths[k] as f64).powf(1.0 / k as f64)).collect();
        // Two-step geometric mean: cancels the alternating term a negative
        // subdominant eigenvalue puts on consecutive ratios.
        let ratio = if reached >= 2 {
            (lengths[reached] as f64 / lengths[reached - 2] as f64).sqrt()
        } else if reached == 1 {
            lengths[1] as f64 / lengths[0] as f64
        } else {
            1.0
        };
        out.push(SeedGrowth { seed: s.format(phi.graph()), lengths, roots, ratio, reached });
    }
    let best = out.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio)).expect("nonempty seeds");
    let ratios: Vec<f64> = best.lengths.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    let tail = &ratios[ratios.len().saturating_sub(4)..];
    let monotone = tail.windows(2).all(|w| w[1] >= w[0]) || tail.windows(2).all(|w| w[1] <= w[0]);
    Ok(GrowthEstimate {
        estimate: best.ratio,
        requested: n,
        non_monotone: !monotone || truncated,
        truncated,
        seeds: out,
    })
}

/// How a graph map was turned into a rose automorphism: the base vertex, the
/// maximal tree, and the edge each generator comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoseMarking {
    pub base: String,
    pub tree: Vec<String>,
    pub generators: Vec<String>,
}

/// The automorphism of `π₁(G, base)` induced by a graph map, written in the
/// free basis dual to a breadth-first maximal tree. The basepoint is carried
/// back along the tree path to its image.
pub fn rose_automorphism(m: &GraphSelfMap) -> Result<(GraphSelfMap, RoseMarking), WordError> {
    let g = m.graph();
    let n = g.vertex_count();
    let mut tree_path: Vec<Option<EdgePath>> = vec![None; n];
    tree_path[0] = Some(Vec::new());
    let mut in_tree = vec![false; g.edge_count()];
    let mut q = VecDeque::from([0]);
    while let Some(v) = q.pop_front() {
        for d in g.directions_at(v) {
            let w = g.term(d);
            if tree_path[w].is_none() {
                let mut p = tree_path[v].clone().unwrap();
                p.push(d);
                tree_path[w] = Some(p);
                in_tree[d.edge] = true;
                q.push_back(w);
            }
        }
    }
    let tree_path: Vec<EdgePath> = tree_path.into_iter().map(Option::unwrap).collect();
    let gens: Vec<usize> = (0..g.edge_count()).filter(|&e| !in_tree[e]).collect();
    let gen_of: BTreeMap<usize, usize> = gens.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let word_of = |p: &[OrientedEdge]| -> FreeWord {
        let letters: Vec<OrientedEdge> = p
            .iter()
            .filter_map(|o| gen_of.get(&o.edge).map(|&i| OrientedEdge { edge: i, forward: o.forward }))
            .collect();
        FreeWord(letters).reduce()
    };
    let delta = &tree_path[m.vertex_image(0)];
    let mut images = Vec::new();
    for &e in &gens {
        let ed = &g.edges()[e];
        let mut loop_path = tree_path[ed.from].clone();
        loop_path.push(OrientedEdge::fwd(e));
        loop_path.extend(crate::graphs::reverse_path(&tree_path[ed.to]));
        let mut img = delta.clone();
        img.extend(m.apply(&loop_path));
        img.extend(crate::graphs::reverse_path(delta));
        images.push(word_of(&img));
    }
    let names: Vec<String> = gens.iter().map(|&e| g.edge_name(e).to_string()).collect();
    let rose = MarkedGraph::rose(&names)?;
    let eimg: Vec<EdgePath> = images.into_iter().map(|w| w.0).collect();
    if eimg.iter().any(|p| p.is_empty()) {
        return Err(WordError::Map(MapError::Invalid(vec!["a generator maps to the identity".into()])));
    }
    let phi = GraphSelfMap::new(rose, vec![0], eimg)?;
    let marking = RoseMarking {
        base: g.vertex_name(0).to_string(),
        tree: (0..g.edge_count()).filter(|&e| in_tree[e]).map(|e| g.edge_name(e).to_string()).collect(),
        generators: names,
    };
    Ok((phi, marking))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi() -> GraphSelfMap {
        GraphSelfMap::rose(&[("A", "A C"), ("B", "A"), ("C", "B")]).unwrap()
    }

    fn phi_inv() -> GraphSelfMap {
        GraphSelfMap::rose(&[("A", "B"), ("B", "C"), ("C", "~B A")]).unwrap()
    }

    #[test]
    fn reductions() {
        let r = MarkedGraph::rose(&["a", "b"]).unwrap();
        let w = FreeWord::parse(&r, "a ~a b").unwrap();
        assert_eq!(w.reduce().format(&r), "b");
        let w = FreeWord::parse(&r, "~a b a").unwrap();
        assert_eq!(w.cyclic_reduce().format(&r), "b");
        let w = FreeWord::parse(&r, "a b ~a ~b").unwrap();
        assert_eq!(w.cyclic_reduce().len(), 4);
    }

    #[test]
    fn apply_examples() {
        let m = phi();
        let a = FreeWord::parse(m.graph(), "A").unwrap();
        assert_eq!(apply_automorphism(&m, &a).unwrap().format(m.graph()), "A C");
        assert!(apply_automorphism(&m, &FreeWord::empty()).unwrap().is_empty());
        let bad = FreeWord(vec![OrientedEdge::fwd(7)]);
        assert!(matches!(apply_automorphism(&m, &bad), Err(WordError::RankMismatch { .. })));
        for x in 0..3 {
            let w = FreeWord::generator(x);
            let back = apply_automorphism(&phi_inv(), &apply_automorphism(&m, &w).unwrap()).unwrap();
            assert_eq!(back.cyclic_reduce(), w);
        }
    }

    #[test]
    fn growth_examples() {
        let id = GraphSelfMap::identity(phi().graph().clone());
        let g = growth_rate(&id, &default_seeds(3), 5, DEFAULT_LENGTH_CAP).unwrap();
        assert_eq!(g.estimate, 1.0);
        let seeds: Vec<FreeWord> = (0..3).map(FreeWord::generator).collect();
        let g = growth_rate(&phi_inv(), &seeds, 20, DEFAULT_LENGTH_CAP).unwrap();
        assert!((g.estimate - 1.324717957).abs() < 1e-3);
        assert!(matches!(
            growth_rate(&phi(), &[FreeWord::empty()], 5, DEFAULT_LENGTH_CAP),
            Err(WordError::TrivialSeed(_))
        ));
    }

    #[test]
    fn rose_automorphism_of_rose_is_itself() {
        let (r, mk) = rose_automorphism(&phi()).unwrap();
        assert_eq!(r, phi());
        assert!(mk.tree.is_empty());
    }
}
