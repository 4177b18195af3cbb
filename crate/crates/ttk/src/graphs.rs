//! Finite graphs with named oriented edges, whole-edge paths, tightening and
//! edge metrics.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },
    #[error("duplicate edge name `{0}`")]
    DuplicateEdgeName(String),
    #[error("duplicate vertex `{0}`")]
    DuplicateVertex(String),
    #[error("edge `{edge}` has endpoint `{vertex}` which is not a vertex")]
    DanglingEndpoint { edge: String, vertex: String },
    #[error("path is not endpoint-compatible at step {position}")]
    IncompatiblePath { position: usize },
    #[error("graph carries no metric")]
    NoMetric,
    #[error("bad metric: {0}")]
    BadMetric(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("cannot subdivide into {0} parts")]
    InvalidParts(usize),
    #[error("graph has no edges")]
    Empty,
}

/// An edge traversed forwards or backwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrientedEdge {
    pub edge: EdgeId,
    pub forward: bool,
}

impl OrientedEdge {
    pub fn fwd(edge: EdgeId) -> Self {
        OrientedEdge { edge, forward: true }
    }

    pub fn bwd(edge: EdgeId) -> Self {
        OrientedEdge { edge, forward: false }
    }

    pub fn rev(self) -> Self {
        OrientedEdge { edge: self.edge, forward: !self.forward }
    }

    /// Dense index in `0..2|E|`; forward directions are even.
    pub fn index(self) -> usize {
        2 * self.edge + usize::from(!self.forward)
    }

    pub fn from_index(i: usize) -> Self {
        OrientedEdge { edge: i / 2, forward: i.is_multiple_of(2) }
    }
}

pub type EdgePath = Vec<OrientedEdge>;

pub fn reverse_path(p: &[OrientedEdge]) -> EdgePath {
    p.iter().rev().map(|o| o.rev()).collect()
}

/// Free reduction of a step sequence; assumes compatibility.
pub fn reduce_steps(p: &[OrientedEdge]) -> EdgePath {
    let mut out: EdgePath = Vec::with_capacity(p.len());
    for &o in p {
        if out.last() == Some(&o.rev()) {
            out.pop();
        } else {
            out.push(o);
        }
    }
    out
}

/// Appends `q` to `out`, cancelling at the junction. Returns the number of
/// cancelled pairs.
pub fn append_reduced(out: &mut EdgePath, q: &[OrientedEdge]) -> usize {
    let mut cancelled = 0;
    for &o in q {
        if out.last() == Some(&o.rev()) {
            out.pop();
            cancelled += 1;
        } else {
            out.push(o);
        }
    }
    cancelled
}

pub fn is_tight(p: &[OrientedEdge]) -> bool {
    p.windows(2).all(|w| w[1] != w[0].rev())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub name: String,
    pub from: VertexId,
    pub to: VertexId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub name: String,
    pub from: String,
    pub to: String,
}

/// Serialized form of a graph, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub connected: bool,
    pub rank: i64,
    pub vertex_count: usize,
    pub edge_count: usize,
    pub valence: BTreeMap<String, usize>,
    /// Vertices of valence < 3 (reported, never rejected).
    pub low_valence: Vec<String>,
    pub metric_ok: Option<bool>,
}

/// Checks a raw graph description; hard errors for malformed input.
pub fn validate_graph(spec: &GraphSpec) -> Result<ValidationReport, GraphError> {
    let g = MarkedGraph::from_spec(spec)?;
    Ok(g.report())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedGraph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    metric: Option<Vec<f64>>,
}

/// Rewrites paths of a source graph into a target graph, edge by edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRelabeling {
    pub edge_image: Vec<EdgePath>,
    pub vertex_image: Vec<VertexId>,
}

impl PathRelabeling {
    pub fn identity(g: &MarkedGraph) -> Self {
        PathRelabeling {
            edge_image: (0..g.edge_count()).map(|e| vec![OrientedEdge::fwd(e)]).collect(),
            vertex_image: (0..g.vertex_count()).collect(),
        }
    }

    pub fn image_of(&self, o: OrientedEdge) -> EdgePath {
        let p = &self.edge_image[o.edge];
        if o.forward {
            p.clone()
        } else {
            reverse_path(p)
        }
    }

    /// Image of a path, tightened.
    pub fn apply(&self, p: &[OrientedEdge]) -> EdgePath {
        let mut out = Vec::with_capacity(p.len() + 4);
        for &o in p {
            append_reduced(&mut out, &self.image_of(o));
        }
        out
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &PathRelabeling) -> PathRelabeling {
        PathRelabeling {
            edge_image: self.edge_image.iter().map(|p| other.apply(p)).collect(),
            vertex_image: self.vertex_image.iter().map(|&v| other.vertex_image[v]).collect(),
        }
    }
}

impl MarkedGraph {
    pub fn new<S: Into<String>>(vertices: Vec<S>, edges: Vec<(S, S, S)>) -> Result<Self, GraphError> {
        let spec = GraphSpec {
            vertices: vertices.into_iter().map(Into::into).collect(),
            edges: edges
                .into_iter()
                .map(|(n, a, b)| EdgeSpec { name: n.into(), from: a.into(), to: b.into() })
                .collect(),
        };
        Self::from_spec(&spec)
    }

    /// The rose with one vertex `v` and the given petals.
    pub fn rose<S: AsRef<str>>(petals: &[S]) -> Result<Self, GraphError> {
        let edges = petals.iter().map(|p| (p.as_ref(), "v", "v")).collect();
        Self::new(vec!["v"], edges)
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self, GraphError> {
        let mut vertices: Vec<String> = Vec::new();
        for v in &spec.vertices {
            if vertices.contains(v) {
                return Err(GraphError::DuplicateVertex(v.clone()));
            }
            vertices.push(v.clone());
        }
        let mut edges: Vec<Edge> = Vec::new();
        for e in &spec.edges {
            if edges.iter().any(|x| x.name == e.name) {
                return Err(GraphError::DuplicateEdgeName(e.name.clone()));
            }
            let look = |v: &String| {
                vertices
                    .iter()
                    .position(|x| x == v)
                    .ok_or_else(|| GraphError::DanglingEndpoint { edge: e.name.clone(), vertex: v.clone() })
            };
            edges.push(Edge { name: e.name.clone(), from: look(&e.from)?, to: look(&e.to)? });
        }
        Self::from_parts(vertices, edges)
    }

    /// Builds from index-level data; checks names and connectivity.
    pub fn from_parts(vertices: Vec<String>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::Empty);
        }
        for (i, e) in edges.iter().enumerate() {
            if edges[..i].iter().any(|x| x.name == e.name) {
                return Err(GraphError::DuplicateEdgeName(e.name.clone()));
            }
            for v in [e.from, e.to] {
                if v >= vertices.len() {
                    return Err(GraphError::DanglingEndpoint { edge: e.name.clone(), vertex: v.to_string() });
                }
            }
        }
        let g = MarkedGraph { vertices, edges, metric: None };
        let c = g.components();
        if c != 1 {
            return Err(GraphError::DisconnectedGraph { components: c });
        }
        Ok(g)
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    name: e.name.clone(),
                    from: self.vertices[e.from].clone(),
                    to: self.vertices[e.to].clone(),
                })
                .collect(),
        }
    }

    pub fn with_metric(mut self, lengths: Vec<f64>) -> Result<Self, GraphError> {
        if lengths.len() != self.edges.len() {
            return Err(GraphError::BadMetric(format!("{} lengths for {} edges", lengths.len(), self.edges.len())));
        }
        if let Some(i) = lengths.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(GraphError::BadMetric(format!("edge `{}` has length {}", self.edges[i].name, lengths[i])));
        }
        self.metric = Some(lengths);
        Ok(self)
    }

    pub fn metric(&self) -> Option<&[f64]> {
        self.metric.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertices[v]
    }

    pub fn edge_name(&self, e: EdgeId) -> &str {
        &self.edges[e].name
    }

    pub fn vertex_id(&self, name: &str) -> Result<VertexId, GraphError> {
        self.vertices.iter().position(|v| v == name).ok_or_else(|| GraphError::UnknownVertex(name.to_string()))
    }

    pub fn edge_id(&self, name: &str) -> Result<EdgeId, GraphError> {
        self.edges.iter().position(|e| e.name == name).ok_or_else(|| GraphError::UnknownEdge(name.to_string()))
    }

    pub fn init(&self, o: OrientedEdge) -> VertexId {
        let e = &self.edges[o.edge];
        if o.forward {
            e.from
        } else {
            e.to
        }
    }

    pub fn term(&self, o: OrientedEdge) -> VertexId {
        self.init(o.rev())
    }

    pub fn rank(&self) -> i64 {
        self.edges.len() as i64 - self.vertices.len() as i64 + 1
    }

    pub fn direction_count(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn directions(&self) -> impl Iterator<Item = OrientedEdge> + '_ {
        (0..self.direction_count()).map(OrientedEdge::from_index)
    }

    /// Oriented edges with initial vertex `v`.
    pub fn directions_at(&self, v: VertexId) -> Vec<OrientedEdge> {
        self.directions().filter(|&d| self.init(d) == v).collect()
    }

    pub fn valence(&self, v: VertexId) -> usize {
        self.edges.iter().map(|e| usize::from(e.from == v) + usize::from(e.to == v)).sum()
    }

    fn components(&self) -> usize {
        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        q.push_back(w);
                    }
                }
            }
        }
        count
    }

    pub fn report(&self) -> ValidationReport {
        let valence: BTreeMap<String, usize> =
            (0..self.vertices.len()).map(|v| (self.vertices[v].clone(), self.valence(v))).collect();
        let low_valence = valence.iter().filter(|(_, &k)| k < 3).map(|(v, _)| v.clone()).collect();
        ValidationReport {
            connected: self.components() == 1,
            rank: self.rank(),
            vertex_count: self.vertices.len(),
            edge_count: self.edges.len(),
            valence,
            low_valence,
            metric_ok: self.metric.as_ref().map(|m| m.iter().all(|&l| l > 0.0 && l.is_finite())),
        }
    }

    /// `A` or `~A`.
    pub fn token(&self, o: OrientedEdge) -> String {
        if o.forward {
            self.edges[o.edge].name.clone()
        } else {
            format!("~{}", self.edges[o.edge].name)
        }
    }

    pub fn parse_oriented(&self, tok: &str) -> Result<OrientedEdge, GraphError> {
        match tok.strip_prefix('~') {
            Some(name) => Ok(OrientedEdge::bwd(self.edge_id(name)?)),
            None => Ok(OrientedEdge::fwd(self.edge_id(tok)?)),
        }
    }

    /// Parses whitespace-separated tokens; checks compatibility.
    pub fn parse_path(&self, s: &str) -> Result<EdgePath, GraphError> {
        let p = s.split_whitespace().map(|t| self.parse_oriented(t)).collect::<Result<EdgePath, _>>()?;
        self.check_path(&p)?;
        Ok(p)
    }

    pub fn format_path(&self, p: &[OrientedEdge]) -> String {
        p.iter().map(|&o| self.token(o)).collect::<Vec<_>>().join(" ")
    }

    pub fn check_path(&self, p: &[OrientedEdge]) -> Result<(), GraphError> {
        if let Some(bad) = p.iter().find(|o| o.edge >= self.edges.len()) {
            return Err(GraphError::UnknownEdge(format!("#{}", bad.edge)));
        }
        for (i, w) in p.windows(2).enumerate() {
            if self.term(w[0]) != self.init(w[1]) {
                return Err(GraphError::IncompatiblePath { position: i + 1 });
            }
        }
        Ok(())
    }

    /// The reduced path homotopic rel endpoints.
    pub fn tighten(&self, p: &[OrientedEdge]) -> Result<EdgePath, GraphError> {
        self.check_path(p)?;
        Ok(reduce_steps(p))
    }

    pub fn path_length(&self, p: &[OrientedEdge]) -> Result<f64, GraphError> {
        let m = self.metric.as_ref().ok_or(GraphError::NoMetric)?;
        Ok(length_with(m, p))
    }

    pub fn total_length(&self) -> Result<f64, GraphError> {
        Ok(self.metric.as_ref().ok_or(GraphError::NoMetric)?.iter().sum())
    }

    pub fn fresh_edge_name(&self, base: &str, taken: &[String]) -> String {
        let mut name = base.to_string();
        while self.edges.iter().any(|e| e.name == name) || taken.contains(&name) {
            name.push('\'');
        }
        name
    }

    pub fn fresh_vertex_name(&self, base: &str) -> String {
        if !self.vertices.iter().any(|v| v == base) {
            return base.to_string();
        }
        (0..).map(|i| format!("{base}{i}")).find(|n| !self.vertices.contains(n)).expect("unbounded")
    }

    /// Replaces `edge` by `parts` edges in series. The first part keeps the
    /// edge's index; the others are appended. Lengths default to equal parts.
    pub fn subdivide(
        &self,
        edge: &str,
        parts: usize,
        lengths: Option<&[f64]>,
    ) -> Result<(MarkedGraph, PathRelabeling), GraphError> {
        let e = self.edge_id(edge)?;
        if parts < 2 {
            return Err(GraphError::InvalidParts(parts));
        }
        if let Some(l) = lengths {
            if l.len() != parts {
                return Err(GraphError::BadMetric(format!("{} lengths for {parts} parts", l.len())));
            }
        }
        let mut names: Vec<String> = Vec::new();
        for i in 1..=parts {
            let n = self.fresh_edge_name(&format!("{edge}{i}"), &names);
            names.push(n);
        }
        self.split_edge_named(e, &names, lengths)
    }

    /// Subdivision with caller-chosen fresh names.
    pub fn split_edge_named(
        &self,
        e: EdgeId,
        names: &[String],
        lengths: Option<&[f64]>,
    ) -> Result<(MarkedGraph, PathRelabeling), GraphError> {
        let parts = names.len();
        if parts < 2 {
            return Err(GraphError::InvalidParts(parts));
        }
        let old = &self.edges[e];
        let mut vertices = self.vertices.clone();
        let mut inner = Vec::new();
        for _ in 1..parts {
            let base = format!("{}.{}", old.name, inner.len() + 1);
            let mut n = base.clone();
            let mut k = 0;
            while vertices.contains(&n) {
                k += 1;
                n = format!("{base}_{k}");
            }
            vertices.push(n);
            inner.push(vertices.len() - 1);
        }
        let mut chain = vec![old.from];
        chain.extend(&inner);
        chain.push(old.to);
        let mut edges = self.edges.clone();
        let mut image = Vec::new();
        for i in 0..parts {
            let ed = Edge { name: names[i].clone(), from: chain[i], to: chain[i + 1] };
            if i == 0 {
                edges[e] = ed;
                image.push(OrientedEdge::fwd(e));
            } else {
                edges.push(ed);
                image.push(OrientedEdge::fwd(edges.len() - 1));
            }
        }
        let mut g = MarkedGraph::from_parts(vertices, edges)?;
        if let Some(m) = &self.metric {
            let total = m[e];
            let split: Vec<f64> = match lengths {
                Some(l) => l.to_vec(),
                None => vec![total / parts as f64; parts],
            };
            let mut metric = m.clone();
            metric[e] = split[0];
            metric.extend_from_slice(&split[1..]);
            g = g.with_metric(metric)?;
        }
        let mut edge_image: Vec<EdgePath> = (0..self.edges.len()).map(|x| vec![OrientedEdge::fwd(x)]).collect();
        edge_image[e] = image;
        let relabel = PathRelabeling { edge_image, vertex_image: (0..self.vertices.len()).collect() };
        Ok((g, relabel))
    }
}

pub fn length_with(lengths: &[f64], p: &[OrientedEdge]) -> f64 {
    p.iter().map(|o| lengths[o.edge]).sum()
}

impl fmt::Display for MarkedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.edges {
            writeln!(f, "{}: {} -> {}", e.name, self.vertices[e.from], self.vertices[e.to])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rose3() -> MarkedGraph {
        MarkedGraph::rose(&["A", "B", "C"]).unwrap()
    }

    #[test]
    fn rose_rank() {
        let r = rose3().report();
        assert!(r.connected);
        assert_eq!(r.rank, 3);
    }

    #[test]
    fn two_vertex_rank() {
        let g =
            MarkedGraph::new(vec!["q", "r"], vec![("B", "q", "r"), ("C", "r", "q"), ("D", "r", "q"), ("E", "q", "q")])
                .unwrap();
        assert_eq!(g.rank(), 3);
    }

    #[test]
    fn dangling_endpoint() {
        let spec = GraphSpec {
            vertices: vec!["v".into()],
            edges: vec![EdgeSpec { name: "A".into(), from: "v".into(), to: "z".into() }],
        };
        assert!(matches!(validate_graph(&spec), Err(GraphError::DanglingEndpoint { .. })));
    }

    #[test]
    fn disconnected_and_duplicates() {
        let r = MarkedGraph::new(vec!["a", "b"], vec![("A", "a", "a")]);
        assert!(matches!(r, Err(GraphError::DisconnectedGraph { components: 2 })));
        let r = MarkedGraph::new(vec!["a"], vec![("A", "a", "a"), ("A", "a", "a")]);
        assert!(matches!(r, Err(GraphError::DuplicateEdgeName(_))));
    }

    #[test]
    fn tighten_examples() {
        let g = rose3();
        let t = |s: &str| g.format_path(&g.tighten(&g.parse_path(s).unwrap()).unwrap());
        assert_eq!(t("A ~A"), "");
        assert_eq!(t("A C"), "A C");
        assert_eq!(t("A C ~C ~A B"), "B");
    }

    #[test]
    fn incompatible_path() {
        let g = MarkedGraph::new(vec!["a", "b"], vec![("A", "a", "b"), ("B", "a", "b")]).unwrap();
        assert!(matches!(g.parse_path("A B"), Err(GraphError::IncompatiblePath { position: 1 })));
        assert!(g.parse_path("A ~B").is_ok());
    }

    #[test]
    fn lengths() {
        let g = rose3().with_metric(vec![1.0, 2.0, 0.5]).unwrap();
        assert_eq!(g.path_length(&[]).unwrap(), 0.0);
        assert_eq!(g.path_length(&g.parse_path("B").unwrap()).unwrap(), 2.0);
        let all = g.parse_path("A B ~C").unwrap();
        assert!((g.path_length(&all).unwrap() - g.total_length().unwrap()).abs() < 1e-12);
        assert!(matches!(rose3().path_length(&[]), Err(GraphError::NoMetric)));
        assert!(rose3().with_metric(vec![1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn subdivide_loop() {
        let g = rose3();
        let (h, rel) = g.subdivide("A", 2, None).unwrap();
        assert_eq!(h.vertex_count(), 2);
        assert_eq!(h.rank(), 3);
        assert!(h.report().low_valence.len() == 1);
        let p = rel.apply(&g.parse_path("A").unwrap());
        assert_eq!(h.format_path(&p), "A1 A2");
        let p = rel.apply(&g.parse_path("~A B").unwrap());
        assert_eq!(h.format_path(&p), "~A2 ~A1 B");
        assert!(matches!(g.subdivide("Z", 2, None), Err(GraphError::UnknownEdge(_))));
        assert!(matches!(g.subdivide("A", 1, None), Err(GraphError::InvalidParts(1))));
    }

    #[test]
    fn subdivide_metric_split() {
        let g = rose3().with_metric(vec![1.0, 1.0, 1.0]).unwrap();
        let (h, _) = g.subdivide("B", 3, Some(&[0.2, 0.3, 0.5])).unwrap();
        assert!((h.total_length().unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(h.edge_count(), 5);
    }
}
