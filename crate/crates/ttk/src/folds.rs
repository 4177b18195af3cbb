//! Stallings fold factorizations of homotopy equivalences, pullback of
//! one-illegal-turn paths through the stages, and inversion of free-group
//! automorphisms by labelled folding.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{
    is_tight, length_with, reverse_path, Edge, EdgePath, GraphError, GraphSpec, MarkedGraph, OrientedEdge,
    PathRelabeling, VertexId,
};
use crate::maps::{GateStructure, GraphSelfMap, MapError};
use crate::words::{apply_automorphism, FreeWord, WordError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FoldError {
    #[error("map is not a homotopy equivalence: {0}")]
    NotHomotopyEquivalence(String),
    #[error("not an automorphism: {0}")]
    NotAutomorphism(String),
    #[error("path `{path}` crosses {count} illegal turns, expected exactly one")]
    IllegalTurnCountViolation { path: String, count: usize },
    #[error("bad stage {index}: {reason}")]
    BadStage { index: usize, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// One elementary step `G_{i-1} → G_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "lowercase")]
pub enum Stage {
    /// `edge` becomes `parts[0] parts[1]` through the new vertex `vertex`.
    Subdivide { edge: String, parts: [String; 2], vertex: String },
    /// The direction `drop` is folded onto `keep` (whole edges, common
    /// initial vertex). Tokens use `~` for reversed orientation.
    Fold { keep: String, drop: String },
}

/// Applies a stage to a graph, returning the new graph and the path map.
pub fn apply_stage(g: &MarkedGraph, st: &Stage) -> Result<(MarkedGraph, PathRelabeling), GraphError> {
    match st {
        Stage::Subdivide { edge, parts, vertex } => {
            let e = g.edge_id(edge)?;
            if g.vertices().contains(vertex) {
                return Err(GraphError::DuplicateVertex(vertex.clone()));
            }
            let old = g.edges()[e].clone();
            let mut vertices = g.vertices().to_vec();
            vertices.push(vertex.clone());
            let p = vertices.len() - 1;
            let mut edges = g.edges().to_vec();
            edges[e] = Edge { name: parts[0].clone(), from: old.from, to: p };
            edges.push(Edge { name: parts[1].clone(), from: p, to: old.to });
            let m = edges.len() - 1;
            let ng = MarkedGraph::from_parts(vertices, edges)?;
            let mut edge_image: Vec<EdgePath> = (0..g.edge_count()).map(|x| vec![OrientedEdge::fwd(x)]).collect();
            edge_image[e] = vec![OrientedEdge::fwd(e), OrientedEdge::fwd(m)];
            Ok((ng, PathRelabeling { edge_image, vertex_image: (0..g.vertex_count()).collect() }))
        }
        Stage::Fold { keep, drop } => {
            let a = g.parse_oriented(keep)?;
            let b = g.parse_oriented(drop)?;
            if a.edge == b.edge || g.init(a) != g.init(b) {
                return Err(GraphError::IncompatiblePath { position: 0 });
            }
            let (ta, tb) = (g.term(a), g.term(b));
            // Vertex tb merges into ta when they differ.
            let vmap: Vec<VertexId> = (0..g.vertex_count())
                .map(|v| {
                    let v = if v == tb { ta } else { v };
                    if ta != tb && v > tb {
                        v - 1
                    } else {
                        v
                    }
                })
                .collect();
            let vertices: Vec<String> =
                g.vertices().iter().enumerate().filter(|&(v, _)| ta == tb || v != tb).map(|(_, n)| n.clone()).collect();
            let emap = |x: usize| if x > b.edge { x - 1 } else { x };
            let edges: Vec<Edge> = g
                .edges()
                .iter()
                .enumerate()
                .filter(|&(x, _)| x != b.edge)
                .map(|(_, ed)| Edge { name: ed.name.clone(), from: vmap[ed.from], to: vmap[ed.to] })
                .collect();
            let ng = MarkedGraph::from_parts(vertices, edges)?;
            let ka = OrientedEdge { edge: emap(a.edge), forward: a.forward };
            let edge_image = (0..g.edge_count())
                .map(|x| {
                    if x == b.edge {
                        vec![if b.forward { ka } else { ka.rev() }]
                    } else {
                        vec![OrientedEdge::fwd(emap(x))]
                    }
                })
                .collect();
            Ok((ng, PathRelabeling { edge_image, vertex_image: vmap }))
        }
    }
}

/// `g = T ∘ f_K ∘ … ∘ f_1` with `f_i` elementary and `T` an isomorphism.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSequence {
    pub map: GraphSelfMap,
    pub stages: Vec<Stage>,
    /// `G_0, …, G_K`.
    pub graphs: Vec<MarkedGraph>,
    /// `relabels[i]` maps `G_i` to `G_{i+1}`.
    pub relabels: Vec<PathRelabeling>,
    /// The part of `g` still to be applied, `G_i → G_0`.
    pub remaining: Vec<Vec<EdgePath>>,
    pub remaining_vertices: Vec<Vec<VertexId>>,
    /// `G_K → G_0`.
    pub terminal: PathRelabeling,
}

/// Serialized fold sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub ttk_schema: u32,
    pub graph: GraphSpec,
    pub stages: Vec<Stage>,
    /// Terminal isomorphism onto the original graph.
    pub terminal: TerminalSpec,
    pub folds: usize,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalSpec {
    pub vertices: BTreeMap<String, String>,
    pub edges: BTreeMap<String, String>,
}

fn oriented_image(r: &[EdgePath], o: OrientedEdge) -> EdgePath {
    if o.forward {
        r[o.edge].clone()
    } else {
        reverse_path(&r[o.edge])
    }
}

/// Factors a homotopy equivalence into subdivisions and whole-edge folds.
///
/// Greedy: the first pair of directions (in direction order) at a common
/// vertex whose images start with the same edge is split at the end of the
/// maximal common prefix of the images, and the two resulting edges are
/// folded. Each fold strictly shortens the total image length.
pub fn fold_factorization(m: &GraphSelfMap) -> Result<FoldSequence, FoldError> {
    let g0 = m.graph().clone();
    let mut st = Builder {
        g: g0.clone(),
        r: m.edge_images().to_vec(),
        rv: m.vertex_images().to_vec(),
        graphs: vec![g0.clone()],
        remaining: vec![m.edge_images().to_vec()],
        remaining_vertices: vec![m.vertex_images().to_vec()],
        stages: Vec::new(),
        relabels: Vec::new(),
        counter: 0,
    };
    loop {
        let mut found = None;
        'outer: for a in st.g.directions() {
            for b in st.g.directions().skip(a.index() + 1) {
                if st.g.init(a) == st.g.init(b) && oriented_image(&st.r, a)[0] == oriented_image(&st.r, b)[0] {
                    found = Some((a, b));
                    break 'outer;
                }
            }
        }
        let Some((mut a, mut b)) = found else { break };
        for _ in 0..2 {
            let (ia, ib) = (oriented_image(&st.r, a), oriented_image(&st.r, b));
            let n = ia.iter().zip(&ib).take_while(|(x, y)| x == y).count();
            let Some(d) = [a, b].into_iter().find(|&d| oriented_image(&st.r, d).len() > n) else {
                break;
            };
            let k = if d.forward { n } else { st.r[d.edge].len() - n };
            let rel = st.split(&g0, d.edge, k)?;
            a = rel.image_of(a)[0];
            b = rel.image_of(b)[0];
        }
        if oriented_image(&st.r, a) != oriented_image(&st.r, b) {
            return Err(FoldError::NotHomotopyEquivalence("inconsistent split".into()));
        }
        if st.g.term(a) == st.g.term(b) {
            return Err(FoldError::NotHomotopyEquivalence(format!(
                "folding `{}` and `{}` would kill a loop",
                st.g.token(a),
                st.g.token(b)
            )));
        }
        let before: usize = st.r.iter().map(Vec::len).sum();
        let stage = Stage::Fold { keep: st.g.token(a), drop: st.g.token(b) };
        st.push(stage)?;
        let after: usize = st.r.iter().map(Vec::len).sum();
        assert!(after < before, "fold must shorten the total image length");
    }
    // The remaining map is an immersion; subdividing edges that cross
    // valence-two vertices of the original graph leaves an isomorphism.
    while let Some(e) = (0..st.r.len()).find(|&e| st.r[e].len() > 1) {
        st.split(&g0, e, 1)?;
    }
    let (g, r, rv) = (&st.g, &st.r, &st.rv);
    let mut used = vec![false; g0.edge_count()];
    for (e, p) in r.iter().enumerate() {
        if p.len() != 1 || std::mem::replace(&mut used[p[0].edge], true) {
            return Err(FoldError::NotHomotopyEquivalence(format!(
                "immersion is not injective: `{}` maps to `{}`",
                g.edge_name(e),
                g0.format_path(p)
            )));
        }
    }
    let vset: BTreeSet<VertexId> = rv.iter().copied().collect();
    if used.iter().any(|u| !u) || vset.len() != g0.vertex_count() || rv.len() != g0.vertex_count() {
        return Err(FoldError::NotHomotopyEquivalence("terminal immersion is not onto".into()));
    }
    let terminal = PathRelabeling { edge_image: st.r, vertex_image: st.rv };
    Ok(FoldSequence {
        map: m.clone(),
        stages: st.stages,
        graphs: st.graphs,
        relabels: st.relabels,
        remaining: st.remaining,
        remaining_vertices: st.remaining_vertices,
        terminal,
    })
}

struct Builder {
    g: MarkedGraph,
    r: Vec<EdgePath>,
    rv: Vec<VertexId>,
    graphs: Vec<MarkedGraph>,
    remaining: Vec<Vec<EdgePath>>,
    remaining_vertices: Vec<Vec<VertexId>>,
    stages: Vec<Stage>,
    relabels: Vec<PathRelabeling>,
    counter: usize,
}

impl Builder {
    fn push(&mut self, stage: Stage) -> Result<PathRelabeling, FoldError> {
        let (ng, rel) = apply_stage(&self.g, &stage)?;
        if let Stage::Fold { drop, .. } = &stage {
            let b = self.g.parse_oriented(drop)?;
            self.r.remove(b.edge);
            if ng.vertex_count() < self.g.vertex_count() {
                self.rv.remove(self.g.term(b));
            }
        }
        self.g = ng;
        self.graphs.push(self.g.clone());
        self.remaining.push(self.r.clone());
        self.remaining_vertices.push(self.rv.clone());
        self.stages.push(stage);
        self.relabels.push(rel.clone());
        Ok(rel)
    }

    /// Splits edge `e` after the first `k` edges of its remaining image.
    fn split(&mut self, g0: &MarkedGraph, e: usize, k: usize) -> Result<PathRelabeling, FoldError> {
        let full = self.r[e].clone();
        let name = self.g.edge_name(e).to_string();
        let p1 = self.g.fresh_edge_name(&format!("{name}1"), &[]);
        let p2 = self.g.fresh_edge_name(&format!("{name}2"), std::slice::from_ref(&p1));
        self.counter += 1;
        let vertex = self.g.fresh_vertex_name(&format!("p{}", self.counter));
        self.r[e] = full[..k].to_vec();
        self.r.push(full[k..].to_vec());
        self.rv.push(g0.term(full[k - 1]));
        self.push(Stage::Subdivide { edge: name, parts: [p1, p2], vertex })
    }
}

impl FoldSequence {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn fold_count(&self) -> usize {
        self.stages.iter().filter(|s| matches!(s, Stage::Fold { .. })).count()
    }

    pub fn subdivision_count(&self) -> usize {
        self.len() - self.fold_count()
    }

    /// The map `G_K → G_0` inverted: `G_0 → G_K`.
    pub fn terminal_inverse(&self) -> PathRelabeling {
        let gk = self.graphs.last().unwrap();
        let mut edge_image = vec![Vec::new(); self.map.graph().edge_count()];
        for (e, p) in self.terminal.edge_image.iter().enumerate() {
            let o = p[0];
            edge_image[o.edge] = vec![OrientedEdge { edge: e, forward: o.forward }];
        }
        let mut vertex_image = vec![0; self.map.graph().vertex_count()];
        for (v, &w) in self.terminal.vertex_image.iter().enumerate() {
            vertex_image[w] = v;
        }
        debug_assert_eq!(edge_image.len(), gk.edge_count());
        PathRelabeling { edge_image, vertex_image }
    }

    /// The self-maps `g_i = (f_i ∘ … ∘ f_1) ∘ r_i` of each intermediate
    /// graph; `g_0 = g` and every `g_i` is conjugate to `g` through the fold
    /// maps.
    pub fn rotated_maps(&self) -> Result<Vec<GraphSelfMap>, FoldError> {
        let mut out = Vec::with_capacity(self.graphs.len());
        let mut push = PathRelabeling::identity(&self.graphs[0]);
        for i in 0..self.graphs.len() {
            let eimg = self.remaining[i].iter().map(|p| push.apply(p)).collect();
            let vimg = self.remaining_vertices[i].iter().map(|&v| push.vertex_image[v]).collect();
            out.push(GraphSelfMap::new(self.graphs[i].clone(), vimg, eimg)?);
            if i < self.relabels.len() {
                push = push.then(&self.relabels[i]);
            }
        }
        Ok(out)
    }

    pub fn to_report(&self) -> FoldReport {
        let gk = self.graphs.last().unwrap();
        let g0 = self.map.graph();
        FoldReport {
            ttk_schema: 1,
            graph: g0.to_spec(),
            stages: self.stages.clone(),
            terminal: TerminalSpec {
                vertices: (0..gk.vertex_count())
                    .map(|v| (gk.vertex_name(v).to_string(), g0.vertex_name(self.terminal.vertex_image[v]).to_string()))
                    .collect(),
                edges: (0..gk.edge_count())
                    .map(|e| (gk.edge_name(e).to_string(), g0.format_path(&self.terminal.edge_image[e])))
                    .collect(),
            },
            folds: self.fold_count(),
            subdivisions: self.subdivision_count(),
        }
    }
}

/// Checks that the stages composed with the terminal isomorphism equal the
/// map, edge by edge and vertex by vertex.
pub fn verify_factorization(seq: &FoldSequence, m: &GraphSelfMap) -> bool {
    compose_and_compare(&seq.relabels, &seq.terminal, m)
}

fn compose_and_compare(rels: &[PathRelabeling], terminal: &PathRelabeling, m: &GraphSelfMap) -> bool {
    let g0 = m.graph();
    for e in 0..g0.edge_count() {
        let mut p = vec![OrientedEdge::fwd(e)];
        for rel in rels.iter().chain(std::iter::once(terminal)) {
            if p.iter().any(|o| o.edge >= rel.edge_image.len()) {
                return false;
            }
            p = rel.apply(&p);
        }
        if &p != m.edge_image(e) {
            return false;
        }
    }
    for v in 0..g0.vertex_count() {
        let mut w = v;
        for rel in rels.iter().chain(std::iter::once(terminal)) {
            match rel.vertex_image.get(w) {
                Some(&x) => w = x,
                None => return false,
            }
        }
        if w != m.vertex_image(v) {
            return false;
        }
    }
    true
}

/// Replays a serialized sequence on the map's graph and checks it.
pub fn verify_report(report: &FoldReport, m: &GraphSelfMap) -> Result<bool, FoldError> {
    let g0 = m.graph();
    if MarkedGraph::from_spec(&report.graph)? != *g0 {
        return Ok(false);
    }
    let mut g = g0.clone();
    let mut rels = Vec::new();
    for (i, st) in report.stages.iter().enumerate() {
        let (ng, rel) = apply_stage(&g, st).map_err(|e| FoldError::BadStage { index: i + 1, reason: e.to_string() })?;
        g = ng;
        rels.push(rel);
    }
    let mut edge_image = vec![Vec::new(); g.edge_count()];
    let mut vertex_image = vec![usize::MAX; g.vertex_count()];
    for (name, tok) in &report.terminal.edges {
        let e = g.edge_id(name)?;
        edge_image[e] = g0.parse_path(tok)?;
    }
    for (name, w) in &report.terminal.vertices {
        vertex_image[g.vertex_id(name)?] = g0.vertex_id(w)?;
    }
    if edge_image.iter().any(|p| p.len() != 1) || vertex_image.contains(&usize::MAX) {
        return Ok(false);
    }
    Ok(compose_and_compare(&rels, &PathRelabeling { edge_image, vertex_image }, m))
}

/// Canonical representative of a path up to reversal.
pub fn canonical(p: &[OrientedEdge]) -> EdgePath {
    let r = reverse_path(p);
    if r.as_slice() < p {
        r
    } else {
        p.to_vec()
    }
}

/// Pulls a set of paths in `G_i` (each with exactly one illegal turn for
/// `g_i`) back through stage `i` (1-based), keeping the paths in `G_{i-1}`
/// that have exactly one illegal turn for `g_{i-1}` and whose tightened image
/// is (fold stages) or contains (subdivision stages) an input path. Paths
/// longer than `cap` in `lengths_prev` are dropped. Results are canonical up
/// to reversal.
///
/// For a fold, a lift either lifts each edge or additionally crosses one
/// cancelling pair of folded edges at the illegal turn; any other placement
/// of the pair adds a second illegal turn.
#[allow(clippy::too_many_arguments)]
pub fn pullback_one_illegal(
    seq: &FoldSequence,
    stage: usize,
    gates_here: &GateStructure,
    gates_prev: &GateStructure,
    paths: &BTreeSet<EdgePath>,
    lengths_prev: Option<&[f64]>,
    cap: f64,
) -> Result<BTreeSet<EdgePath>, FoldError> {
    let here = &seq.graphs[stage];
    let prev = &seq.graphs[stage - 1];
    let rel = &seq.relabels[stage - 1];
    let mut out = BTreeSet::new();
    let keep = |s: EdgePath, out: &mut BTreeSet<EdgePath>| {
        if s.is_empty() || !is_tight(&s) || gates_prev.illegal_count(&s) != 1 {
            return;
        }
        if let Some(l) = lengths_prev {
            if length_with(l, &s) > cap {
                return;
            }
        }
        out.insert(canonical(&s));
    };
    for gamma in paths {
        let count = gates_here.illegal_count(gamma);
        if !is_tight(gamma) || count != 1 {
            return Err(FoldError::IllegalTurnCountViolation { path: here.format_path(gamma), count });
        }
        match &seq.stages[stage - 1] {
            Stage::Subdivide { .. } => {
                let e = rel.edge_image.iter().position(|p| p.len() == 2).expect("subdivision stage");
                let m = rel.edge_image[e][1].edge;
                let mut s = Vec::with_capacity(gamma.len());
                let mut j = 0;
                while j < gamma.len() {
                    let o = gamma[j];
                    if o.edge == e || o.edge == m {
                        s.push(OrientedEdge { edge: e, forward: o.forward });
                        let partner = match (o.edge == e, o.forward) {
                            (true, true) => Some(OrientedEdge::fwd(m)),
                            (false, false) => Some(OrientedEdge::bwd(e)),
                            _ => None,
                        };
                        if partner.is_some() && gamma.get(j + 1).copied() == partner {
                            j += 1;
                        }
                    } else {
                        s.push(o);
                    }
                    j += 1;
                }
                keep(s, &mut out);
            }
            Stage::Fold { .. } => {
                let t = gates_here.illegal_positions(gamma)[0];
                let pre = |z: OrientedEdge| -> Vec<OrientedEdge> {
                    prev.directions().filter(|&x| rel.image_of(x) == [z]).collect()
                };
                let lifts: Vec<Vec<OrientedEdge>> = gamma.iter().map(|&z| pre(z)).collect();
                let mut pairs = Vec::new();
                for x in prev.directions() {
                    for y in prev.directions() {
                        if x.edge != y.edge && prev.term(x) == prev.init(y) && rel.image_of(x) == rel.image_of(y.rev())
                        {
                            pairs.push((x, y));
                        }
                    }
                }
                let mut stack: Vec<(usize, EdgePath)> = lifts[0].iter().map(|&x| (1, vec![x])).collect();
                while let Some((j, cur)) = stack.pop() {
                    if j == gamma.len() {
                        keep(cur, &mut out);
                        continue;
                    }
                    let end = prev.term(*cur.last().unwrap());
                    for &x in &lifts[j] {
                        if prev.init(x) == end {
                            let mut c = cur.clone();
                            c.push(x);
                            stack.push((j + 1, c));
                        }
                        if j == t {
                            for &(p, q) in &pairs {
                                if prev.init(p) == end && prev.term(q) == prev.init(x) {
                                    let mut c = cur.clone();
                                    c.extend([p, q, x]);
                                    stack.push((j + 1, c));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverts an automorphism of a rose by folding the bouquet of its image
/// loops, tracking for every edge a word in the source generators. Each
/// identification is preceded by a change of those words at one endpoint
/// (not the base vertex) so that the two edges carry the same word.
pub fn invert_automorphism(phi: &GraphSelfMap) -> Result<GraphSelfMap, FoldError> {
    if !phi.is_rose() {
        return Err(FoldError::Word(WordError::NotRose));
    }
    let rank = phi.graph().edge_count();
    // (from, to, letter read forward, word)
    let mut edges: Vec<(usize, usize, OrientedEdge, FreeWord)> = Vec::new();
    let mut nverts = 1usize;
    for i in 0..rank {
        let w = phi.edge_image(i);
        let mut at = 0;
        for (j, &l) in w.iter().enumerate() {
            let last = j + 1 == w.len();
            let to = if last {
                0
            } else {
                nverts += 1;
                nverts - 1
            };
            let word = if last { FreeWord::generator(i) } else { FreeWord::empty() };
            edges.push((at, to, l, word));
            at = to;
        }
    }
    // Direction (edge, forward) leaving its initial vertex.
    let dir = |edges: &[(usize, usize, OrientedEdge, FreeWord)], e: usize, fwd: bool| {
        let (a, b, l, ref w) = edges[e];
        if fwd {
            (a, b, l, w.clone())
        } else {
            (b, a, l.rev(), w.inverse())
        }
    };
    loop {
        let mut found = None;
        'search: for e1 in 0..edges.len() {
            for f1 in [true, false] {
                let (v1, _, l1, _) = dir(&edges, e1, f1);
                for e2 in e1 + 1..edges.len() {
                    for f2 in [true, false] {
                        let (v2, _, l2, _) = dir(&edges, e2, f2);
                        if v1 == v2 && l1 == l2 {
                            found = Some(((e1, f1), (e2, f2)));
                            break 'search;
                        }
                    }
                }
            }
        }
        let Some(((e1, f1), (e2, f2))) = found else { break };
        let (_, u1, _, w1) = dir(&edges, e1, f1);
        let (_, u2, _, w2) = dir(&edges, e2, f2);
        if u1 == u2 {
            return Err(FoldError::NotAutomorphism("a nontrivial loop reads the identity".into()));
        }
        let (u, g) = if u2 != 0 { (u2, w1.inverse().mul(&w2)) } else { (u1, w2.inverse().mul(&w1)) };
        for ed in edges.iter_mut() {
            if ed.0 == u {
                ed.3 = g.mul(&ed.3);
            }
            if ed.1 == u {
                ed.3 = ed.3.mul(&g.inverse());
            }
        }
        debug_assert_eq!(dir(&edges, e1, f1).3, dir(&edges, e2, f2).3);
        // Merge the non-base endpoint into the other one and drop e2.
        let (gone, stay) = if u2 != 0 { (u2, u1) } else { (u1, u2) };
        edges.remove(e2);
        for ed in edges.iter_mut() {
            if ed.0 == gone {
                ed.0 = stay;
            }
            if ed.1 == gone {
                ed.1 = stay;
            }
        }
    }
    let verts: BTreeSet<usize> = edges.iter().flat_map(|e| [e.0, e.1]).collect();
    if verts.len() != 1 || edges.len() != rank {
        return Err(FoldError::NotAutomorphism("the image is a proper subgroup".into()));
    }
    let mut images: Vec<Option<EdgePath>> = vec![None; rank];
    for (_, _, l, w) in &edges {
        let img = if l.forward { w.clone() } else { w.inverse() };
        images[l.edge] = Some(img.0);
    }
    let eimg: Vec<EdgePath> = images
        .into_iter()
        .map(|x| x.ok_or_else(|| FoldError::NotAutomorphism("a generator is missed".into())))
        .collect::<Result<_, _>>()?;
    Ok(GraphSelfMap::new(phi.graph().clone(), vec![0], eimg)?)
}

/// Whether `φ ∘ ψ` and `ψ ∘ φ` are both inner. Returns the conjugator `w`
/// with `φ(ψ(x)) = w x w̄` for every generator `x`.
pub fn is_inverse_pair(phi: &GraphSelfMap, psi: &GraphSelfMap) -> Result<Option<FreeWord>, FoldError> {
    match inner_conjugator(phi, psi)? {
        Some(w) if inner_conjugator(psi, phi)?.is_some() => Ok(Some(w)),
        _ => Ok(None),
    }
}

/// `w` with `outer(inner(x)) = w x w̄` for all generators, if one exists.
pub fn inner_conjugator(outer: &GraphSelfMap, inner: &GraphSelfMap) -> Result<Option<FreeWord>, FoldError> {
    let rank = outer.graph().edge_count();
    if inner.graph().edge_count() != rank {
        return Ok(None);
    }
    let c: Vec<FreeWord> = (0..rank)
        .map(|x| apply_automorphism(outer, &FreeWord(inner.edge_image(x).clone())))
        .collect::<Result<_, _>>()?;
    if rank == 0 {
        return Ok(Some(FreeWord::empty()));
    }
    // c₀ = p x₀ p̄ forces w ∈ p·⟨x₀⟩.
    let c0 = &c[0];
    if c0.cyclic_reduce() != FreeWord::generator(0) {
        return Ok(None);
    }
    let p = FreeWord(c0.0[..(c0.len() - 1) / 2].to_vec());
    let bound = c.iter().map(FreeWord::len).max().unwrap_or(0) as i64 + 1;
    let x0 = FreeWord::generator(0);
    for k in (0..=bound).flat_map(|k| [k, -k]) {
        let step = if k > 0 { x0.clone() } else { x0.inverse() };
        let mut w = p.clone();
        for _ in 0..k.unsigned_abs() {
            w = w.mul(&step);
        }
        if (0..rank).all(|x| w.mul(&FreeWord::generator(x)).mul(&w.inverse()) == c[x]) {
            return Ok(Some(w));
        }
    }
    Ok(None)
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
    fn factor_phi() {
        let m = phi();
        let seq = fold_factorization(&m).unwrap();
        assert!(verify_factorization(&seq, &m));
        assert_eq!(seq.fold_count(), 1);
        let maps = seq.rotated_maps().unwrap();
        assert_eq!(maps[0], m);
        let rep = seq.to_report();
        assert!(verify_report(&rep, &m).unwrap());
    }

    #[test]
    fn deleting_a_stage_breaks_verification() {
        let m = phi().power(3).unwrap();
        let seq = fold_factorization(&m).unwrap();
        assert!(verify_factorization(&seq, &m));
        for i in 0..seq.len() {
            let mut rep = seq.to_report();
            rep.stages.remove(i);
            assert!(!matches!(verify_report(&rep, &m), Ok(true)), "stage {i}");
        }
    }

    #[test]
    fn identity_and_non_equivalences() {
        let id = GraphSelfMap::identity(phi().graph().clone());
        let seq = fold_factorization(&id).unwrap();
        assert!(seq.is_empty());
        let squash = GraphSelfMap::rose(&[("a", "a"), ("b", "a")]).unwrap();
        assert!(matches!(fold_factorization(&squash), Err(FoldError::NotHomotopyEquivalence(_))));
        let square = GraphSelfMap::rose(&[("a", "a a"), ("b", "b")]).unwrap();
        assert!(matches!(fold_factorization(&square), Err(FoldError::NotHomotopyEquivalence(_))));
    }

    #[test]
    fn inversion() {
        let inv = invert_automorphism(&phi()).unwrap();
        assert_eq!(inv, phi_inv());
        assert_eq!(is_inverse_pair(&phi(), &inv).unwrap(), Some(FreeWord::empty()));
        assert_eq!(is_inverse_pair(&phi(), &phi()).unwrap(), None);
        let id = GraphSelfMap::identity(phi().graph().clone());
        assert_eq!(is_inverse_pair(&id, &id).unwrap(), Some(FreeWord::empty()));
        let square = GraphSelfMap::rose(&[("a", "a a"), ("b", "b")]).unwrap();
        assert!(matches!(invert_automorphism(&square), Err(FoldError::NotAutomorphism(_))));
        // Inner composites count as inverse pairs.
        let conj = GraphSelfMap::rose(&[("A", "C B ~C"), ("B", "C"), ("C", "C ~B A ~C")]).unwrap();
        let w = is_inverse_pair(&phi(), &conj).unwrap().unwrap();
        assert_eq!(w.format(phi().graph()), "B");
    }
}
