//! Graph self-maps: composition, the direction map, gates, illegal turns,
//! train-track checks and local Whitehead graphs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{
    append_reduced, is_tight, reverse_path, EdgeId, EdgePath, GraphError, MarkedGraph, OrientedEdge, VertexId,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid map: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("maps are defined on different graphs")]
    GraphMismatch,
    #[error("expected a map on a rose")]
    NotRose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub valid: bool,
    pub problems: Vec<String>,
}

/// Serialized map: vertex images and edge images as path tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapSpec {
    #[serde(default)]
    pub vertices: BTreeMap<String, String>,
    pub edges: BTreeMap<String, String>,
}

/// A topological representative: vertices to vertices, edges to tight paths.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSelfMap {
    graph: MarkedGraph,
    vimg: Vec<VertexId>,
    eimg: Vec<EdgePath>,
}

/// Unordered pair of directions at a common vertex, stored with `a <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Turn {
    pub a: OrientedEdge,
    pub b: OrientedEdge,
}

impl Turn {
    pub fn new(x: OrientedEdge, y: OrientedEdge) -> Self {
        if x <= y {
            Turn { a: x, b: y }
        } else {
            Turn { a: y, b: x }
        }
    }

    pub fn degenerate(&self) -> bool {
        self.a == self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateStructure {
    /// Gate id per direction index.
    pub gate_of: Vec<usize>,
    pub gates: Vec<Vec<OrientedEdge>>,
    pub illegal_turns: Vec<Turn>,
    /// Periodic directions and their minimal periods.
    pub periodic: Vec<(OrientedEdge, usize)>,
    pub period_lcm: u64,
}

impl GateStructure {
    pub fn is_illegal(&self, x: OrientedEdge, y: OrientedEdge) -> bool {
        x != y && self.gate_of[x.index()] == self.gate_of[y.index()]
    }

    /// Number of illegal turns crossed by a path.
    pub fn illegal_count(&self, p: &[OrientedEdge]) -> usize {
        p.windows(2).filter(|w| self.is_illegal(w[0].rev(), w[1])).count()
    }

    /// Positions `i` such that the turn between steps `i-1` and `i` is illegal.
    pub fn illegal_positions(&self, p: &[OrientedEdge]) -> Vec<usize> {
        (1..p.len()).filter(|&i| self.is_illegal(p[i - 1].rev(), p[i])).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrackReport {
    pub train_track: bool,
    /// (edge, position in its image, illegal turn crossed there).
    pub witness: Option<(EdgeId, usize, Turn)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteheadGraph {
    pub vertex: VertexId,
    pub directions: Vec<OrientedEdge>,
    pub edges: Vec<Turn>,
    pub connected: bool,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Validates raw map data against all representative invariants.
pub fn check_map(graph: &MarkedGraph, vimg: &[VertexId], eimg: &[EdgePath]) -> MapReport {
    let mut problems = Vec::new();
    if vimg.len() != graph.vertex_count() {
        problems.push(format!("{} vertex images for {} vertices", vimg.len(), graph.vertex_count()));
    }
    if eimg.len() != graph.edge_count() {
        problems.push(format!("{} edge images for {} edges", eimg.len(), graph.edge_count()));
    }
    if !problems.is_empty() {
        return MapReport { valid: false, problems };
    }
    for (v, &w) in vimg.iter().enumerate() {
        if w >= graph.vertex_count() {
            problems.push(format!("vertex `{}` maps outside the graph", graph.vertex_name(v)));
        }
    }
    for (e, p) in eimg.iter().enumerate() {
        let name = graph.edge_name(e);
        if p.is_empty() {
            problems.push(format!("image of `{name}` is empty"));
            continue;
        }
        if let Err(err) = graph.check_path(p) {
            problems.push(format!("image of `{name}`: {err}"));
            continue;
        }
        if !is_tight(p) {
            problems.push(format!("image of `{name}` is not tight"));
        }
        let ed = &graph.edges()[e];
        if vimg.get(ed.from).is_some_and(|&w| w != graph.init(p[0])) {
            problems.push(format!("image of `{name}` does not start at the image of its origin"));
        }
        if vimg.get(ed.to).is_some_and(|&w| w != graph.term(*p.last().unwrap())) {
            problems.push(format!("image of `{name}` does not end at the image of its terminus"));
        }
    }
    MapReport { valid: problems.is_empty(), problems }
}

impl GraphSelfMap {
    pub fn new(graph: MarkedGraph, vimg: Vec<VertexId>, eimg: Vec<EdgePath>) -> Result<Self, MapError> {
        let r = check_map(&graph, &vimg, &eimg);
        if !r.valid {
            return Err(MapError::Invalid(r.problems));
        }
        Ok(GraphSelfMap { graph, vimg, eimg })
    }

    /// Builds from token strings. Missing vertex images are inferred from
    /// edge images.
    pub fn from_tokens(
        graph: MarkedGraph,
        vertices: &BTreeMap<String, String>,
        edges: &BTreeMap<String, String>,
    ) -> Result<Self, MapError> {
        let mut eimg = vec![Vec::new(); graph.edge_count()];
        let mut seen = vec![false; graph.edge_count()];
        for (name, img) in edges {
            let e = graph.edge_id(name)?;
            eimg[e] = graph.parse_path(img)?;
            seen[e] = true;
        }
        let missing: Vec<String> = (0..graph.edge_count())
            .filter(|&e| !seen[e])
            .map(|e| format!("no image for edge `{}`", graph.edge_name(e)))
            .collect();
        if !missing.is_empty() {
            return Err(MapError::Invalid(missing));
        }
        let mut vimg: Vec<Option<VertexId>> = vec![None; graph.vertex_count()];
        for (v, w) in vertices {
            vimg[graph.vertex_id(v)?] = Some(graph.vertex_id(w)?);
        }
        for (e, p) in eimg.iter().enumerate() {
            let ed = &graph.edges()[e];
            if let (Some(first), Some(last)) = (p.first(), p.last()) {
                vimg[ed.from].get_or_insert(graph.init(*first));
                vimg[ed.to].get_or_insert(graph.term(*last));
            }
        }
        let mut out = Vec::new();
        for (v, w) in vimg.into_iter().enumerate() {
            match w {
                Some(w) => out.push(w),
                None => return Err(MapError::Invalid(vec![format!("no image for vertex `{}`", graph.vertex_name(v))])),
            }
        }
        Self::new(graph, out, eimg)
    }

    pub fn from_spec(graph: MarkedGraph, spec: &MapSpec) -> Result<Self, MapError> {
        Self::from_tokens(graph, &spec.vertices, &spec.edges)
    }

    pub fn to_spec(&self) -> MapSpec {
        let g = &self.graph;
        MapSpec {
            vertices: (0..g.vertex_count())
                .map(|v| (g.vertex_name(v).to_string(), g.vertex_name(self.vimg[v]).to_string()))
                .collect(),
            edges: (0..g.edge_count()).map(|e| (g.edge_name(e).to_string(), g.format_path(&self.eimg[e]))).collect(),
        }
    }

    /// A map on the rose with the given petal images, e.g. `[("A","A C"), ...]`.
    pub fn rose(images: &[(&str, &str)]) -> Result<Self, MapError> {
        let names: Vec<&str> = images.iter().map(|p| p.0).collect();
        let g = MarkedGraph::rose(&names)?;
        let edges = images.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        Self::from_tokens(g, &BTreeMap::new(), &edges)
    }

    pub fn identity(graph: MarkedGraph) -> Self {
        let vimg = (0..graph.vertex_count()).collect();
        let eimg = (0..graph.edge_count()).map(|e| vec![OrientedEdge::fwd(e)]).collect();
        GraphSelfMap { graph, vimg, eimg }
    }

    pub fn graph(&self) -> &MarkedGraph {
        &self.graph
    }

    pub fn vertex_image(&self, v: VertexId) -> VertexId {
        self.vimg[v]
    }

    pub fn vertex_images(&self) -> &[VertexId] {
        &self.vimg
    }

    pub fn edge_image(&self, e: EdgeId) -> &EdgePath {
        &self.eimg[e]
    }

    pub fn edge_images(&self) -> &[EdgePath] {
        &self.eimg
    }

    pub fn image(&self, o: OrientedEdge) -> EdgePath {
        if o.forward {
            self.eimg[o.edge].clone()
        } else {
            reverse_path(&self.eimg[o.edge])
        }
    }

    pub fn is_rose(&self) -> bool {
        self.graph.vertex_count() == 1
    }

    /// Tightened image of a path.
    pub fn apply(&self, p: &[OrientedEdge]) -> EdgePath {
        self.apply_counting(p).0
    }

    /// Tightened image and the number of cancelled pairs.
    pub fn apply_counting(&self, p: &[OrientedEdge]) -> (EdgePath, usize) {
        let mut out = Vec::with_capacity(p.len() * 2);
        let mut c = 0;
        for &o in p {
            c += append_reduced(&mut out, &self.image(o));
        }
        (out, c)
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &GraphSelfMap, inner: &GraphSelfMap) -> Result<GraphSelfMap, MapError> {
        if outer.graph != inner.graph {
            return Err(MapError::GraphMismatch);
        }
        let eimg: Vec<EdgePath> = inner.eimg.iter().map(|p| outer.apply(p)).collect();
        let vimg = inner.vimg.iter().map(|&v| outer.vimg[v]).collect();
        GraphSelfMap::new(outer.graph.clone(), vimg, eimg)
    }

    pub fn power(&self, q: usize) -> Result<GraphSelfMap, MapError> {
        let mut h = GraphSelfMap::identity(self.graph.clone());
        for _ in 0..q {
            h = GraphSelfMap::compose(self, &h)?;
        }
        Ok(h)
    }

    /// The tightened `n`-fold image of `e`, with total cancellations.
    pub fn iterate_edge(&self, e: EdgeId, n: usize) -> (EdgePath, usize) {
        let mut p = vec![OrientedEdge::fwd(e)];
        let mut total = 0;
        for _ in 0..n {
            let (q, c) = self.apply_counting(&p);
            p = q;
            total += c;
        }
        (p, total)
    }

    /// First step of the image of each direction, indexed by direction.
    pub fn direction_map(&self) -> Vec<OrientedEdge> {
        self.graph.directions().map(|d| self.image(d)[0]).collect()
    }

    pub fn gates(&self) -> GateStructure {
        let dm = self.direction_map();
        let nd = dm.len();
        let mut cur: Vec<usize> = (0..nd).collect();
        for _ in 0..nd.max(1) {
            cur = cur.iter().map(|&d| dm[d].index()).collect();
        }
        let mut ids: BTreeMap<(VertexId, usize), usize> = BTreeMap::new();
        let mut gate_of = vec![0; nd];
        let mut gates: Vec<Vec<OrientedEdge>> = Vec::new();
        for d in 0..nd {
            let o = OrientedEdge::from_index(d);
            let key = (self.graph.init(o), cur[d]);
            let id = *ids.entry(key).or_insert_with(|| {
                gates.push(Vec::new());
                gates.len() - 1
            });
            gate_of[d] = id;
            gates[id].push(o);
        }
        let mut illegal_turns = Vec::new();
        for g in &gates {
            for i in 0..g.len() {
                for j in i + 1..g.len() {
                    illegal_turns.push(Turn::new(g[i], g[j]));
                }
            }
        }
        illegal_turns.sort();
        let mut periodic = Vec::new();
        let mut period_lcm = 1u64;
        for d in 0..nd {
            let mut x = dm[d].index();
            for p in 1..=nd {
                if x == d {
                    periodic.push((OrientedEdge::from_index(d), p));
                    period_lcm = lcm(period_lcm, p as u64);
                    break;
                }
                x = dm[x].index();
            }
        }
        GateStructure { gate_of, gates, illegal_turns, periodic, period_lcm }
    }

    pub fn is_train_track(&self) -> TrainTrackReport {
        let gs = self.gates();
        for (e, p) in self.eimg.iter().enumerate() {
            for i in 1..p.len() {
                if gs.is_illegal(p[i - 1].rev(), p[i]) {
                    return TrainTrackReport {
                        train_track: false,
                        witness: Some((e, i, Turn::new(p[i - 1].rev(), p[i]))),
                    };
                }
            }
        }
        TrainTrackReport { train_track: true, witness: None }
    }

    /// Turns crossed by edge images, closed under the direction map. For a
    /// train track map these are exactly the turns taken by all iterates.
    pub fn taken_turns(&self) -> BTreeSet<Turn> {
        let dm = self.direction_map();
        let mut taken: BTreeSet<Turn> = BTreeSet::new();
        let mut stack = Vec::new();
        for p in &self.eimg {
            for w in p.windows(2) {
                let t = Turn::new(w[0].rev(), w[1]);
                if !t.degenerate() && taken.insert(t) {
                    stack.push(t);
                }
            }
        }
        while let Some(t) = stack.pop() {
            let u = Turn::new(dm[t.a.index()], dm[t.b.index()]);
            if !u.degenerate() && taken.insert(u) {
                stack.push(u);
            }
        }
        taken
    }

    pub fn local_whitehead_graph(&self, v: VertexId) -> WhiteheadGraph {
        let directions = self.graph.directions_at(v);
        let taken = self.taken_turns();
        let edges: Vec<Turn> = taken.into_iter().filter(|t| self.graph.init(t.a) == v).collect();
        let pos = |o: OrientedEdge| directions.iter().position(|&d| d == o).unwrap();
        let mut parent: Vec<usize> = (0..directions.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for t in &edges {
            let (a, b) = (find(&mut parent, pos(t.a)), find(&mut parent, pos(t.b)));
            parent[a] = b;
        }
        let roots: BTreeSet<usize> = (0..directions.len()).map(|i| find(&mut parent, i)).collect();
        WhiteheadGraph { vertex: v, directions, edges, connected: roots.len() <= 1 }
    }

    pub fn turn_label(&self, t: &Turn) -> String {
        format!("{{{}, {}}}", self.graph.token(t.a), self.graph.token(t.b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn phi() -> GraphSelfMap {
        GraphSelfMap::rose(&[("A", "A C"), ("B", "A"), ("C", "B")]).unwrap()
    }

    fn two_vertex() -> GraphSelfMap {
        let g =
            MarkedGraph::new(vec!["q", "r"], vec![("B", "q", "r"), ("C", "r", "q"), ("D", "r", "q"), ("E", "q", "q")])
                .unwrap();
        let edges = [("B", "C ~E ~C D E"), ("C", "~C ~B ~E ~D"), ("D", "B"), ("E", "C B")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        GraphSelfMap::from_tokens(g, &BTreeMap::new(), &edges).unwrap()
    }

    fn toks(m: &GraphSelfMap, p: &[OrientedEdge]) -> String {
        m.graph().format_path(p)
    }

    #[test]
    fn check_map_examples() {
        let m = phi();
        assert!(check_map(m.graph(), m.vertex_images(), m.edge_images()).valid);
        let g = m.graph().clone();
        let mut e = m.edge_images().to_vec();
        e[1] = vec![];
        assert!(!check_map(&g, m.vertex_images(), &e).valid);
        let g2 = MarkedGraph::new(vec!["a", "b"], vec![("X", "a", "b"), ("Y", "a", "b")]).unwrap();
        let bad = check_map(&g2, &[0, 1], &[vec![OrientedEdge::bwd(0)], vec![OrientedEdge::fwd(1)]]);
        assert!(!bad.valid);
    }

    #[test]
    fn compose_and_iterate() {
        let m = phi();
        let id = GraphSelfMap::identity(m.graph().clone());
        assert_eq!(GraphSelfMap::compose(&id, &m).unwrap(), m);
        let m2 = m.power(2).unwrap();
        assert_eq!(toks(&m, m2.edge_image(1)), "A C");
        assert_eq!(toks(&m, &m.iterate_edge(0, 0).0), "A");
        assert_eq!(toks(&m, &m.iterate_edge(0, 2).0), "A C B");
    }

    #[test]
    fn direction_map_phi() {
        let m = phi();
        let dm = m.direction_map();
        let g = m.graph();
        let t = |s: &str| g.parse_oriented(s).unwrap().index();
        assert_eq!(g.token(dm[t("A")]), "A");
        assert_eq!(g.token(dm[t("B")]), "A");
        assert_eq!(g.token(dm[t("C")]), "B");
        assert_eq!(g.token(dm[t("~A")]), "~C");
    }

    #[test]
    fn gates_phi() {
        let m = phi();
        let gs = m.gates();
        assert_eq!(gs.gates.len(), 4);
        let labels: Vec<String> = gs.illegal_turns.iter().map(|t| m.turn_label(t)).collect();
        assert_eq!(labels, vec!["{A, B}", "{A, C}", "{B, C}"]);
        assert_eq!(gs.period_lcm, 3);
        let id = GraphSelfMap::identity(m.graph().clone());
        assert!(id.gates().illegal_turns.is_empty());
    }

    #[test]
    fn train_tracks() {
        assert!(phi().is_train_track().train_track);
        assert!(two_vertex().is_train_track().train_track);
        let bad = GraphSelfMap::rose(&[("a", "a b"), ("b", "~a")]).unwrap();
        let r = bad.is_train_track();
        assert!(!r.train_track);
        let (e, _, t) = r.witness.unwrap();
        assert_eq!(bad.graph().edge_name(e), "a");
        assert_eq!(bad.turn_label(&t), "{~a, b}");
    }

    #[test]
    fn whitehead_graphs() {
        let m = two_vertex();
        for v in 0..2 {
            assert!(m.local_whitehead_graph(v).connected);
        }
        let id = GraphSelfMap::identity(m.graph().clone());
        assert!(!id.local_whitehead_graph(0).connected);
        assert!(phi().local_whitehead_graph(0).connected);
    }
}
