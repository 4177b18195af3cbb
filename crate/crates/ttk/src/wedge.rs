//! Wedge-model combinatorics for a Nielsen-unique representative: dihedral
//! valences, free edges, the non-free subgraph and its growth `λ′`, finite
//! approximations of leaves of the stable foliation, and the comparison
//! `λ(φ⁻¹) ≤ λ′ < λ(φ)`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{length_with, EdgeId};
use crate::maps::GraphSelfMap;
use crate::nielsen::{
    classify, collapse_inp, inp_rays, is_nielsen_path, subdivide_fixed, Classification, NielsenError, NielsenPath,
    Verdict, LENGTH_REL_TOL,
};
use crate::spectral::{
    metric_unchecked, preimage_count, spectral_radius, transition_matrix, SpectralError, TransitionMatrix,
};
use crate::words::GrowthEstimate;

pub const DEFAULT_DEPTH: usize = 6;
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WedgeError {
    #[error("not a Nielsen-unique representative: {0}")]
    NotNielsenUnique(String),
    #[error("the non-free subgraph is empty")]
    EmptySubgraph,
    #[error("edge `{0}` is not in the non-free subgraph")]
    EdgeNotInSubgraph(String),
    #[error("position {position} is outside (0, {length}) on edge `{edge}`")]
    PositionOutOfRange { edge: String, position: f64, length: f64 },
    #[error("not parageometric: {0}")]
    NotParageometric(String),
    #[error("no evidence for λ(φ⁻¹) was supplied")]
    MissingInverseEvidence,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Nielsen(#[from] NielsenError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WedgeModel {
    pub map: GraphSelfMap,
    pub rho: NielsenPath,
    pub lambda: f64,
    /// PF lengths, total 1.
    pub lengths: Vec<f64>,
    /// Traversals of each edge by `ρ`.
    pub valence: Vec<usize>,
    pub free_edges: Vec<EdgeId>,
    pub closed: bool,
    /// Cumulative parameter tables of the halves: `(edge step, start t)`.
    alpha: Vec<(crate::graphs::OrientedEdge, f64)>,
    beta: Vec<(crate::graphs::OrientedEdge, f64)>,
    pub half_length: f64,
}

/// Attaches the wedge along `ρ`: checks that `ρ` is an indivisible Nielsen
/// path with one illegal turn and length `2·Length(G)`.
pub fn build_wedge(m: &GraphSelfMap, rho: &NielsenPath, tol: f64) -> Result<WedgeModel, WedgeError> {
    let em = metric_unchecked(m, tol)?;
    let total: f64 = em.lengths.iter().sum();
    let g = m.graph();
    if !is_nielsen_path(m, &rho.path, 1) {
        return Err(WedgeError::NotNielsenUnique("ρ is not a Nielsen path of the map".into()));
    }
    let gates = m.gates();
    let ill = gates.illegal_positions(&rho.path);
    if ill.len() != 1 {
        return Err(WedgeError::NotNielsenUnique(format!("ρ crosses {} illegal turns", ill.len())));
    }
    let len = length_with(&em.lengths, &rho.path);
    if (len - 2.0 * total).abs() > LENGTH_REL_TOL * total {
        return Err(WedgeError::NotNielsenUnique(format!("Length(ρ) = {len}, expected {}", 2.0 * total)));
    }
    let split = ill[0];
    let rho = NielsenPath { split, ..rho.clone() };
    let valence = crate::nielsen::edge_counts(g.edge_count(), &rho.path);
    let free_edges = (0..g.edge_count()).filter(|&e| valence[e] == 1).collect();
    let table = |p: &[crate::graphs::OrientedEdge]| {
        let mut acc = 0.0;
        p.iter()
            .map(|&o| {
                let t = acc;
                acc += em.lengths[o.edge];
                (o, t)
            })
            .collect::<Vec<_>>()
    };
    let alpha = table(&rho.alpha());
    let beta = table(&rho.beta());
    Ok(WedgeModel {
        map: m.clone(),
        closed: g.init(rho.path[0]) == g.term(*rho.path.last().unwrap()),
        half_length: length_with(&em.lengths, &rho.alpha()),
        rho,
        lambda: em.lambda,
        lengths: em.lengths,
        valence,
        free_edges,
        alpha,
        beta,
    })
}

impl WedgeModel {
    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// `Σ valence(e)·Length(e)`, which equals `Length(ρ)`.
    pub fn weighted_valence(&self) -> f64 {
        self.valence.iter().zip(&self.lengths).map(|(&v, &l)| v as f64 * l).sum()
    }

    fn point_on(&self, half: &[(crate::graphs::OrientedEdge, f64)], t: f64) -> Option<(EdgeId, f64)> {
        for &(o, start) in half {
            let l = self.lengths[o.edge];
            if t > start - SNAP && t < start + l + SNAP {
                let off = (t - start).clamp(0.0, l);
                let pos = if o.forward { off } else { l - off };
                return Some((o.edge, pos));
            }
        }
        None
    }

    /// Parameters `t` with `α(t)` resp. `β(t)` equal to the point.
    fn params(&self, half: &[(crate::graphs::OrientedEdge, f64)], e: EdgeId, pos: f64) -> Vec<f64> {
        half.iter()
            .filter(|(o, _)| o.edge == e)
            .map(|&(o, start)| start + if o.forward { pos } else { self.lengths[e] - pos })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonFreeSubgraph {
    /// Edges of dihedral valence greater than one.
    pub edges: Vec<String>,
    pub edge_ids: Vec<EdgeId>,
    pub matrix: TransitionMatrix,
    pub lambda_prime: f64,
    pub proper: bool,
}

pub fn nonfree_subgraph(w: &WedgeModel, tol: f64) -> Result<NonFreeSubgraph, WedgeError> {
    let keep: Vec<EdgeId> = (0..w.valence.len()).filter(|&e| w.valence[e] > 1).collect();
    if keep.is_empty() {
        return Err(WedgeError::EmptySubgraph);
    }
    let m = transition_matrix(&w.map);
    let m1 = m.restrict(&keep);
    let lambda_prime = spectral_radius(&m1, tol)?;
    Ok(NonFreeSubgraph {
        edges: keep.iter().map(|&e| w.map.graph().edge_name(e).to_string()).collect(),
        proper: keep.len() < w.valence.len(),
        edge_ids: keep,
        matrix: m1,
        lambda_prime,
    })
}

/// Points of `G₁` in edge `e` whose first `n` iterates stay in `G₁` and that
/// map to a fixed interior point: the row sum of `M₁ⁿ` at `e`.
pub fn i1_preimage_count(sub: &NonFreeSubgraph, e: &str, n: u32) -> Result<u128, WedgeError> {
    let i = sub.edges.iter().position(|x| x == e).ok_or_else(|| WedgeError::EdgeNotInSubgraph(e.to_string()))?;
    Ok(preimage_count(&sub.matrix, i, n)?)
}

/// Counts directed walks of length `n` ending at `e` in the transition
/// digraph (one arc `e' → x` per occurrence of `x` in the image of `e'`), by
/// explicit enumeration.
pub fn brute_force_walks(m: &TransitionMatrix, e: usize, n: u32) -> u128 {
    // Walk backwards from e: predecessors x with m[e][x] occurrences.
    fn go(m: &TransitionMatrix, e: usize, n: u32) -> u128 {
        if n == 0 {
            return 1;
        }
        let mut total = 0u128;
        for x in 0..m.dim() {
            for _ in 0..m.rows[e][x] {
                total += go(m, x, n - 1);
            }
        }
        total
    }
    go(m, e, n)
}

/// A point of a leaf: edge and distance from the edge's initial vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafPoint {
    pub edge: EdgeId,
    pub position: f64,
    pub depth: usize,
    /// At a vertex of G; not explored further.
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafGraph {
    pub points: Vec<LeafPoint>,
    /// Vertical segments `α(t) ∼ β(t)` as point-index pairs with their `t`.
    pub segments: Vec<(usize, usize, f64)>,
    pub acyclic: bool,
    /// Nonsingular points whose segments were all explored: (point, degree
    /// in the leaf graph, dihedral valence of its edge).
    pub valence_table: Vec<(usize, usize, usize)>,
    /// Some segment ended at a vertex of G (a singular leaf).
    pub hit_vertex: bool,
}

impl LeafGraph {
    pub fn valences_agree(&self) -> bool {
        self.valence_table.iter().all(|&(_, d, v)| d == v)
    }

    pub fn to_dot(&self, w: &WedgeModel) -> String {
        let g = w.map.graph();
        let mut s = String::from("graph leaf {\n");
        for (i, p) in self.points.iter().enumerate() {
            let _ = writeln!(s, "  p{i} [label=\"{}@{:.6}\"];", g.edge_name(p.edge), p.position);
        }
        for &(a, b, t) in &self.segments {
            let _ = writeln!(s, "  p{a} -- p{b} [label=\"t={t:.6}\"];");
        }
        s.push_str("}\n");
        s
    }
}

/// Breadth-first approximation of the leaf through a point, following the
/// vertical segments `α(t) ∼ β(t)` of the wedge up to `depth` steps.
pub fn leaf_graph(w: &WedgeModel, edge: EdgeId, position: f64, depth: usize) -> Result<LeafGraph, WedgeError> {
    let l = w.lengths.get(edge).copied().unwrap_or(0.0);
    if !(position > SNAP && position < l - SNAP) {
        return Err(WedgeError::PositionOutOfRange {
            edge: w.map.graph().edge_name(edge.min(w.lengths.len().saturating_sub(1))).to_string(),
            position,
            length: l,
        });
    }
    let mut points = vec![LeafPoint { edge, position, depth: 0, singular: false }];
    let mut segs: BTreeMap<i64, (usize, usize, f64)> = BTreeMap::new();
    let mut hit_vertex = false;
    let key = |t: f64| (t / SNAP).round() as i64;
    let find_or_add = |points: &mut Vec<LeafPoint>, e: EdgeId, pos: f64, d: usize, singular: bool| -> (usize, bool) {
        if let Some(i) = points.iter().position(|p| p.edge == e && (p.position - pos).abs() < 1e3 * SNAP) {
            (i, false)
        } else {
            points.push(LeafPoint { edge: e, position: pos, depth: d, singular });
            (points.len() - 1, true)
        }
    };
    let mut queue = VecDeque::from([0usize]);
    let mut cyclic = false;
    while let Some(i) = queue.pop_front() {
        let p = points[i];
        if p.depth >= depth || p.singular {
            continue;
        }
        for (from, to) in [(&w.alpha, &w.beta), (&w.beta, &w.alpha)] {
            for t in w.params(from, p.edge, p.position) {
                if t <= SNAP || t > w.half_length + SNAP {
                    continue;
                }
                let k = key(t);
                if segs.contains_key(&k) {
                    continue;
                }
                let Some((e2, pos2)) = w.point_on(to, t) else { continue };
                let l2 = w.lengths[e2];
                let singular = pos2 < SNAP || pos2 > l2 - SNAP;
                hit_vertex |= singular;
                let (j, new) = find_or_add(&mut points, e2, pos2, p.depth + 1, singular);
                if !new {
                    cyclic = true;
                }
                segs.insert(k, (i, j, t));
                if new {
                    queue.push_back(j);
                }
            }
        }
    }
    let segments: Vec<(usize, usize, f64)> = segs.into_values().collect();
    let mut degree = vec![0usize; points.len()];
    for &(a, b, _) in &segments {
        degree[a] += 1;
        degree[b] += 1;
    }
    let valence_table = (0..points.len())
        .filter(|&i| points[i].depth < depth && !points[i].singular)
        .map(|i| (i, degree[i], w.valence[points[i].edge]))
        .collect();
    Ok(LeafGraph {
        acyclic: !cyclic && segments.len() + 1 == points.len(),
        points,
        segments,
        valence_table,
        hit_vertex,
    })
}

/// Where `λ(φ⁻¹)` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InverseEvidence {
    /// A train track representative of `φ⁻¹` (its PF eigenvalue).
    Representative(GraphSelfMap),
    /// A word-growth estimate.
    Growth(GrowthEstimate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub ttk_schema: u32,
    /// The representative is for `φ^power`; all three numbers refer to that
    /// power.
    pub power: usize,
    pub lambda_phi: f64,
    pub lambda_prime: f64,
    pub lambda_phi_inverse: f64,
    /// The same numbers as `power`-th roots, i.e. for `φ` itself.
    pub per_step: [f64; 3],
    pub margin: f64,
    pub tolerance: f64,
    pub verdict: bool,
    pub provenance: BTreeMap<String, String>,
    pub statements: Vec<String>,
}

pub const COROLLARY_STATEMENT: &str = "φ⁻¹ is neither geometric nor parageometric";

fn sig10(x: f64) -> f64 {
    format!("{x:.9e}").parse().unwrap_or(x)
}

/// Assembles `λ(φ)`, `λ′` and `λ(φ⁻¹)` for a parageometric representative of
/// `φ^power` and checks `λ(φ⁻¹) ≤ λ′ < λ(φ)`.
pub fn verify_gap(
    rep: &GraphSelfMap,
    power: usize,
    classification: &Classification,
    inverse: Option<&InverseEvidence>,
    tol: f64,
) -> Result<(GapReport, WedgeModel, NonFreeSubgraph), WedgeError> {
    if classification.verdict != Verdict::ParageometricCandidate {
        return Err(WedgeError::NotParageometric(classification.verdict.name().to_string()));
    }
    let rho = classification.inp.as_ref().ok_or_else(|| WedgeError::NotParageometric("no ρ".into()))?;
    let w = build_wedge(rep, rho, tol)?;
    let sub = nonfree_subgraph(&w, tol)?;
    let inverse = inverse.ok_or(WedgeError::MissingInverseEvidence)?;
    let mut provenance = BTreeMap::new();
    provenance
        .insert("lambda_phi".to_string(), format!("PF eigenvalue of the Nielsen-unique representative of φ^{power}"));
    provenance.insert(
        "lambda_prime".to_string(),
        format!(
            "spectral radius of the transition matrix restricted to {} edges of dihedral valence > 1",
            sub.edges.len()
        ),
    );
    let (inv1, inv_tol) = match inverse {
        InverseEvidence::Representative(m) => {
            let em = metric_unchecked(m, tol)?;
            provenance.insert(
                "lambda_phi_inverse".into(),
                format!("PF eigenvalue of the supplied representative of φ⁻¹, raised to the power {power}"),
            );
            (em.lambda, tol)
        }
        InverseEvidence::Growth(g) => {
            provenance.insert(
                "lambda_phi_inverse".into(),
                format!(
                    "word-growth estimate of φ⁻¹ at N = {} over {} seeds, raised to the power {power}",
                    g.requested,
                    g.seeds.len()
                ),
            );
            (g.estimate, 1e-3)
        }
    };
    let q = power as i32;
    let lam_inv = inv1.powi(q);
    let slack = tol.max(inv_tol * q as f64 * inv1.powi(q - 1));
    let verdict = lam_inv <= sub.lambda_prime + slack && sub.lambda_prime < w.lambda - tol;
    let margin = (sub.lambda_prime - lam_inv).min(w.lambda - sub.lambda_prime);
    let root = |x: f64| x.powf(1.0 / power as f64);
    let mut statements = Vec::new();
    if verdict {
        statements.push(format!(
            "λ(φ⁻¹) = {:.10} ≤ λ′ = {:.10} < λ(φ) = {:.10} (for φ^{power})",
            lam_inv, sub.lambda_prime, w.lambda
        ));
        statements.push("λ(φ) > λ(φ⁻¹)".into());
        statements.push(COROLLARY_STATEMENT.into());
    }
    Ok((
        GapReport {
            ttk_schema: 1,
            power,
            lambda_phi: sig10(w.lambda),
            lambda_prime: sig10(sub.lambda_prime),
            lambda_phi_inverse: sig10(lam_inv),
            per_step: [sig10(root(w.lambda)), sig10(root(sub.lambda_prime)), sig10(inv1)],
            margin: sig10(margin),
            tolerance: slack,
            verdict,
            provenance,
            statements,
        },
        w,
        sub,
    ))
}

/// A Nielsen-unique representative of some power of `m`, found by
/// collapsing an indivisible Nielsen path of a fixed-point subdivision of
/// `m^q` (shortest first) and classifying the result.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedRepresentative {
    pub power: usize,
    pub map: GraphSelfMap,
    pub classification: Classification,
}

pub fn derive_parageometric(
    m: &GraphSelfMap,
    max_power: usize,
    max_back: usize,
    tol: f64,
) -> Result<DerivedRepresentative, WedgeError> {
    let mut tried = Vec::new();
    for q in 1..=max_power.max(1) {
        let mq = m.power(q).map_err(NielsenError::from)?;
        let c = classify(&mq, max_power, max_back, tol);
        if c.verdict == Verdict::ParageometricCandidate {
            return Ok(DerivedRepresentative { power: q, map: mq, classification: c });
        }
        let sub = subdivide_fixed(&mq)?;
        let em = metric_unchecked(&sub.map, tol)?;
        let mut inps =
            inp_rays(&sub.map, &em.lengths, em.lambda, em.lengths.iter().sum::<f64>() * (1.0 + LENGTH_REL_TOL));
        inps.sort_by(|a, b| a.length.total_cmp(&b.length));
        for rho in &inps {
            let Ok(rep) = collapse_inp(&sub.map, &em.lengths, em.lambda, rho) else { continue };
            let c = classify(&rep, max_power, max_back, tol);
            if c.verdict == Verdict::ParageometricCandidate {
                return Ok(DerivedRepresentative { power: q, map: rep, classification: c });
            }
            tried.push(format!("q={q}: {}", c.verdict.name()));
        }
        if q >= 8 && tried.is_empty() {
            break;
        }
    }
    Err(WedgeError::NotParageometric(format!("no parageometric representative found ({})", tried.join(", "))))
}
