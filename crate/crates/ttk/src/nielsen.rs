//! Nielsen paths: fixed-point subdivision, search for indivisible Nielsen
//! paths, elimination through a fold factorization, folding along a Nielsen
//! path, and the geometric/parageometric classification.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::folds::{canonical, fold_factorization, pullback_one_illegal, FoldError, Stage};
use crate::graphs::{is_tight, length_with, reverse_path, EdgePath, GraphError, OrientedEdge, PathRelabeling};
use crate::maps::{GraphSelfMap, MapError};
use crate::spectral::{is_primitive, metric_unchecked, transition_matrix, SpectralError};

pub const DEFAULT_MAX_BACK: usize = 64;
pub const DEFAULT_MAX_POWER: usize = 24;
/// Relative tolerance for `Length(ρ) = 2L`.
pub const LENGTH_REL_TOL: f64 = 1e-6;
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NielsenError {
    #[error("map is not a train track map")]
    NotTrainTrack,
    #[error("no fold factorization: {0}")]
    NoFactorization(FoldError),
    #[error("path is not a verified indivisible Nielsen path")]
    NotVerifiedNielsen,
    #[error("point at parameter {0} is not a preimage of a vertex")]
    NotVertexPreimage(f64),
    #[error("quotient is not well defined: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl From<FoldError> for NielsenError {
    fn from(e: FoldError) -> Self {
        NielsenError::NoFactorization(e)
    }
}

/// A Nielsen path `ρ = ᾱ β` for `g^power` with its unique illegal turn at
/// `split`.
#[derive(Debug, Clone, PartialEq)]
pub struct NielsenPath {
    pub path: EdgePath,
    pub power: usize,
    pub split: usize,
    pub closed: bool,
    pub length: f64,
}

impl NielsenPath {
    pub fn alpha(&self) -> EdgePath {
        reverse_path(&self.path[..self.split])
    }

    pub fn beta(&self) -> EdgePath {
        self.path[self.split..].to_vec()
    }
}

/// Split `edge` of a map at position `k` of its image: the first part maps to
/// `image[..k]`, the second to `image[k..]`.
fn split_names(h: &GraphSelfMap, e: usize) -> (String, String) {
    let g = h.graph();
    let name = g.edge_name(e);
    let (mut a, mut b) = (format!("{name}1"), format!("{name}2"));
    while g.edge_id(&a).is_ok() || g.edge_id(&b).is_ok() {
        a.push('\'');
        b.push('\'');
    }
    (a, b)
}

fn fresh_vertex(h: &GraphSelfMap, base: String) -> String {
    let mut v = base;
    while h.graph().vertex_id(&v).is_ok() {
        v.push('\'');
    }
    v
}

fn subdivide_with(
    h: &GraphSelfMap,
    e: usize,
    vertex: String,
    img1: impl FnOnce(&PathRelabeling) -> EdgePath,
    img2: impl FnOnce(&PathRelabeling) -> EdgePath,
    vimg_new: Option<usize>,
) -> Result<(GraphSelfMap, PathRelabeling), NielsenError> {
    let (a, b) = split_names(h, e);
    let st = Stage::Subdivide { edge: h.graph().edge_name(e).to_string(), parts: [a, b], vertex };
    let (ng, rel) = crate::folds::apply_stage(h.graph(), &st)?;
    let mut eimg: Vec<EdgePath> = h.edge_images().iter().map(|p| rel.apply(p)).collect();
    eimg[e] = img1(&rel);
    eimg.push(img2(&rel));
    let mut vimg = h.vertex_images().to_vec();
    let p = ng.vertex_count() - 1;
    vimg.push(vimg_new.unwrap_or(p));
    Ok((GraphSelfMap::new(ng, vimg, eimg)?, rel))
}

/// Splits edge `e` after the first `k` edges of its image.
pub fn split_edge_at_image(
    h: &GraphSelfMap,
    e: usize,
    k: usize,
) -> Result<(GraphSelfMap, PathRelabeling), NielsenError> {
    let im = h.edge_image(e).clone();
    if k == 0 || k >= im.len() {
        return Err(NielsenError::Inconsistent(format!("cannot split at {k}")));
    }
    let v = fresh_vertex(h, format!("v{}", h.graph().vertex_count()));
    let target = h.graph().term(im[k - 1]);
    let (i1, i2) = (im[..k].to_vec(), im[k..].to_vec());
    subdivide_with(h, e, v, |r| r.apply(&i1), |r| r.apply(&i2), Some(target))
}

/// A map with every interior fixed point of an edge made into a vertex,
/// together with the subdivision map from the original graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSubdivision {
    pub map: GraphSelfMap,
    pub relabel: PathRelabeling,
}

impl FixedSubdivision {
    /// Rewrites a path of the subdivided graph as a path of the original
    /// graph, if it starts and ends at original vertices.
    pub fn to_original(&self, p: &[OrientedEdge]) -> Option<EdgePath> {
        let n0 = self.relabel.edge_image.len();
        let mut first: BTreeMap<OrientedEdge, OrientedEdge> = BTreeMap::new();
        for e in 0..n0 {
            for o in [OrientedEdge::fwd(e), OrientedEdge::bwd(e)] {
                first.insert(self.relabel.image_of(o)[0], o);
            }
        }
        let mut out = Vec::new();
        let mut j = 0;
        while j < p.len() {
            let o = *first.get(&p[j])?;
            let full = self.relabel.image_of(o);
            if p.get(j..j + full.len())? != full.as_slice() {
                return None;
            }
            out.push(o);
            j += full.len();
        }
        Some(out)
    }
}

/// Subdivides at interior fixed points: whenever an edge crosses itself in
/// its own image (except a forward occurrence at either end), the crossing
/// contains a fixed point, which becomes a new fixed vertex.
pub fn subdivide_fixed(m: &GraphSelfMap) -> Result<FixedSubdivision, NielsenError> {
    let mut h = m.clone();
    let mut total = PathRelabeling::identity(m.graph());
    loop {
        let mut found = None;
        'edges: for e in 0..h.graph().edge_count() {
            let im = h.edge_image(e);
            for (j, x) in im.iter().enumerate() {
                if x.edge != e || (x.forward && (j == 0 || j + 1 == im.len())) {
                    continue;
                }
                found = Some((e, j, x.forward));
                break 'edges;
            }
        }
        let Some((e, j, fwd)) = found else { break };
        let im = h.edge_image(e).clone();
        let v = fresh_vertex(&h, format!("{}p{}", h.graph().edge_name(e), h.graph().vertex_count()));
        let m_new = h.graph().edge_count();
        let (pre, suf) = (im[..j].to_vec(), im[j + 1..].to_vec());
        let (nh, rel) = subdivide_with(
            &h,
            e,
            v,
            |r| {
                let mut p = r.apply(&pre);
                p.push(if fwd { OrientedEdge::fwd(e) } else { OrientedEdge::bwd(m_new) });
                p
            },
            |r| {
                let mut p = vec![if fwd { OrientedEdge::fwd(m_new) } else { OrientedEdge::bwd(e) }];
                p.extend(r.apply(&suf));
                p
            },
            None,
        )?;
        h = nh;
        total = total.then(&rel);
    }
    Ok(FixedSubdivision { map: h, relabel: total })
}

/// `g^power` fixes both endpoints and `tighten(g^power(p)) = p`. The empty
/// path at a fixed vertex is not representable here and is handled by
/// [`is_nielsen_constant`].
pub fn is_nielsen_path(m: &GraphSelfMap, p: &[OrientedEdge], power: usize) -> bool {
    if p.is_empty() || !is_tight(p) || m.graph().check_path(p).is_err() {
        return false;
    }
    let (a, b) = (m.graph().init(p[0]), m.graph().term(*p.last().unwrap()));
    let mut q = p.to_vec();
    let (mut va, mut vb) = (a, b);
    for _ in 0..power {
        q = m.apply(&q);
        va = m.vertex_image(va);
        vb = m.vertex_image(vb);
    }
    va == a && vb == b && q == p
}

/// The constant path at `v` is (degenerately) Nielsen iff `v` is fixed.
pub fn is_nielsen_constant(m: &GraphSelfMap, v: usize, power: usize) -> bool {
    let mut w = v;
    for _ in 0..power {
        w = m.vertex_image(w);
    }
    w == v
}

/// Search limits for [`find_inp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InpSearchOptions {
    /// Upper bound on each legal half, in units of `Length(G)`.
    pub half_cap: f64,
}

impl Default for InpSearchOptions {
    fn default() -> Self {
        InpSearchOptions { half_cap: 1.0 + LENGTH_REL_TOL }
    }
}

/// Result of the search for one power.
#[derive(Debug, Clone, PartialEq)]
pub struct InpSearch {
    pub power: usize,
    /// `g^power` subdivided at its fixed points.
    pub subdivision: FixedSubdivision,
    pub lambda: f64,
    /// PF lengths on the subdivided graph, normalized so that the original
    /// graph has total length 1.
    pub lengths: Vec<f64>,
    pub inps: Vec<NielsenPath>,
}

impl InpSearch {
    pub fn map(&self) -> &GraphSelfMap {
        &self.subdivision.map
    }
}

fn ray_len(lengths: &[f64], r: &[OrientedEdge]) -> f64 {
    length_with(lengths, r)
}

/// Indivisible Nielsen paths of `h` (fixed endpoints at vertices), by growing
/// the two legal rays from each turn whose directions have the same image.
/// The images of the rays share an initial segment `τ` that cancels; once
/// they diverge, `λ s = |τ| + s` determines the half length `s`.
pub fn inp_rays(h: &GraphSelfMap, lengths: &[f64], lambda: f64, half_cap: f64) -> Vec<NielsenPath> {
    let g = h.graph();
    let gates = h.gates();
    let dm = h.direction_map();
    let legal = |x: OrientedEdge, y: OrientedEdge| y != x.rev() && !gates.is_illegal(x.rev(), y);
    let img = |p: &[OrientedEdge]| -> EdgePath { p.iter().flat_map(|&o| h.image(o)).collect() };
    let mut found: BTreeSet<EdgePath> = BTreeSet::new();
    let mut out = Vec::new();
    let dirs: Vec<OrientedEdge> = g.directions().collect();
    struct St {
        ra: EdgePath,
        rb: EdgePath,
    }
    for (i, &d1) in dirs.iter().enumerate() {
        for &d2 in &dirs[i + 1..] {
            if g.init(d1) != g.init(d2) || dm[d1.index()] != dm[d2.index()] {
                continue;
            }
            let mut stack = vec![St { ra: vec![d1], rb: vec![d2] }];
            while let Some(St { ra, rb }) = stack.pop() {
                let (la, lb) = (ray_len(lengths, &ra), ray_len(lengths, &rb));
                let (ha, hb) = (img(&ra), img(&rb));
                let p = ha.iter().zip(&hb).take_while(|(x, y)| x == y).count();
                let prefix = ray_len(lengths, &ha[..p]);
                if prefix / (lambda - 1.0) > half_cap + SNAP {
                    continue;
                }
                let branch = |r: &EdgePath| -> Vec<OrientedEdge> {
                    let last = *r.last().unwrap();
                    g.directions_at(g.term(last)).into_iter().filter(|&d| legal(last, d)).collect()
                };
                if p < ha.len().min(hb.len()) {
                    if p == 0 {
                        continue;
                    }
                    let consistent = [(&ra, &ha), (&rb, &hb)]
                        .iter()
                        .all(|(r, hh)| (0..r.len().min(hh.len() - p)).all(|k| r[k] == hh[p + k]));
                    if !consistent {
                        continue;
                    }
                    let s = prefix / (lambda - 1.0);
                    if la >= s - SNAP && lb >= s - SNAP {
                        let trunc = |r: &EdgePath| -> Option<EdgePath> {
                            let mut acc = 0.0;
                            let mut t = Vec::new();
                            for &o in r {
                                if acc >= s - SNAP {
                                    break;
                                }
                                t.push(o);
                                acc += lengths[o.edge];
                            }
                            ((acc - s).abs() <= SNAP * 10.0).then_some(t)
                        };
                        if let (Some(ta), Some(tb)) = (trunc(&ra), trunc(&rb)) {
                            let mut path = reverse_path(&ta);
                            path.extend(&tb);
                            if is_nielsen_path(h, &path, 1) && found.insert(canonical(&path)) {
                                let closed = g.init(path[0]) == g.term(*path.last().unwrap());
                                out.push(NielsenPath {
                                    length: ray_len(lengths, &path),
                                    split: ta.len(),
                                    path,
                                    power: 1,
                                    closed,
                                });
                            }
                        }
                        continue;
                    }
                    let (mut na, mut nb) = (ra.clone(), rb.clone());
                    let mut extended = false;
                    for (r, hh, l) in [(&mut na, &ha, la), (&mut nb, &hb, lb)] {
                        if l < s - SNAP && hh.len() - p > r.len() {
                            r.push(hh[p + r.len()]);
                            extended = true;
                        }
                    }
                    if extended {
                        let ok = [&na, &nb].iter().all(|r| r.len() < 2 || legal(r[r.len() - 2], r[r.len() - 1]));
                        if ok {
                            stack.push(St { ra: na, rb: nb });
                        }
                        continue;
                    }
                    let short_a = la < s - SNAP;
                    let r = if short_a { &ra } else { &rb };
                    for d in branch(r) {
                        let (mut na, mut nb) = (ra.clone(), rb.clone());
                        if short_a {
                            na.push(d)
                        } else {
                            nb.push(d)
                        }
                        stack.push(St { ra: na, rb: nb });
                    }
                } else {
                    let short_a = ha.len() <= hb.len();
                    let r = if short_a { &ra } else { &rb };
                    for d in branch(r) {
                        let (mut na, mut nb) = (ra.clone(), rb.clone());
                        if short_a {
                            na.push(d)
                        } else {
                            nb.push(d)
                        }
                        stack.push(St { ra: na, rb: nb });
                    }
                }
            }
        }
    }
    out.sort_by_key(|a| canonical(&a.path));
    out
}

/// Brute-force enumeration of Nielsen paths with exactly one illegal turn
/// and length at most `cap`, starting and ending at fixed vertices. Small
/// graphs only; used as an oracle for [`inp_rays`].
pub fn inp_brute_force(h: &GraphSelfMap, lengths: &[f64], cap: f64) -> Vec<EdgePath> {
    let g = h.graph();
    let gates = h.gates();
    let fixed: Vec<usize> = (0..g.vertex_count()).filter(|&v| h.vertex_image(v) == v).collect();
    let mut res = BTreeSet::new();
    let mut stack: Vec<(EdgePath, f64, usize)> = Vec::new();
    for &v in &fixed {
        for d in g.directions_at(v) {
            stack.push((vec![d], lengths[d.edge], 0));
        }
    }
    while let Some((p, len, ill)) = stack.pop() {
        if len > cap + SNAP {
            continue;
        }
        let last = *p.last().unwrap();
        let end = g.term(last);
        if ill == 1 && h.vertex_image(end) == end && h.apply(&p) == p {
            res.insert(canonical(&p));
        }
        for d in g.directions_at(end) {
            if d == last.rev() {
                continue;
            }
            let ill2 = ill + usize::from(gates.is_illegal(last.rev(), d));
            if ill2 > 1 {
                continue;
            }
            let mut q = p.clone();
            q.push(d);
            stack.push((q, len + lengths[d.edge], ill2));
        }
    }
    res.into_iter().collect()
}

/// PF lengths of `m`, normalized to total 1.
fn pf_lengths(m: &GraphSelfMap, tol: f64) -> Result<(f64, Vec<f64>), NielsenError> {
    let em = metric_unchecked(m, tol)?;
    Ok((em.lambda, em.lengths))
}

/// Searches `g^q` for `q = 1..=power_bound`.
pub fn find_inp(
    m: &GraphSelfMap,
    power_bound: usize,
    opts: InpSearchOptions,
    tol: f64,
) -> Result<Vec<InpSearch>, NielsenError> {
    if !m.is_train_track().train_track {
        return Err(NielsenError::NotTrainTrack);
    }
    let (lambda1, base_lengths) = pf_lengths(m, tol)?;
    let mut out = Vec::new();
    for q in 1..=power_bound.max(1) {
        let sub = subdivide_fixed(&m.power(q)?)?;
        // Lengths pulled back through the subdivision: each original edge's
        // length is shared by its pieces in proportion to their images.
        let (lam, mut lengths) = pf_lengths(&sub.map, tol)?;
        let scale: f64 = base_lengths.iter().sum::<f64>() / lengths.iter().sum::<f64>();
        lengths.iter_mut().for_each(|l| *l *= scale);
        let lambda = lam;
        debug_assert!((lambda - lambda1.powi(q as i32)).abs() < 1e-6 * lambda.max(1.0));
        let mut inps = inp_rays(&sub.map, &lengths, lambda, opts.half_cap * base_lengths.iter().sum::<f64>());
        inps.iter_mut().for_each(|n| n.power = q);
        out.push(InpSearch { power: q, subdivision: sub, lambda, lengths, inps });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Elimination

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EliminationOutcome {
    Empty,
    Survivors,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elimination {
    pub outcome: EliminationOutcome,
    /// Pullback steps (one per fold-sequence stage) until the set emptied or
    /// a set repeated.
    pub steps: usize,
    /// How many of those steps were fold stages (the rest are subdivisions).
    pub fold_steps: usize,
    pub rounds: usize,
    pub stages: usize,
    pub folds: usize,
    pub initial: Vec<EdgePath>,
    /// Set sizes after each step.
    pub sizes: Vec<usize>,
    /// Surviving paths in the original graph (canonical up to reversal).
    pub survivors: Vec<EdgePath>,
    pub cap: f64,
}

/// Length-2 paths crossing an illegal turn, up to reversal.
pub fn illegal_length_two(m: &GraphSelfMap) -> BTreeSet<EdgePath> {
    m.gates().illegal_turns.iter().map(|t| canonical(&[t.a.rev(), t.b])).collect()
}

/// Pulls the set of length-2 illegal paths back around the fold cycle of `m`
/// until it empties (no periodic Nielsen paths) or repeats (candidates
/// survive). `max_back` bounds the number of full passes.
pub fn nielsen_elimination(m: &GraphSelfMap, max_back: usize, tol: f64) -> Result<Elimination, NielsenError> {
    if !m.is_train_track().train_track {
        return Err(NielsenError::NotTrainTrack);
    }
    let e0 = illegal_length_two(m);
    let seq = fold_factorization(m)?;
    let mut res = Elimination {
        outcome: EliminationOutcome::Empty,
        steps: 0,
        fold_steps: 0,
        rounds: 0,
        stages: seq.len(),
        folds: seq.fold_count(),
        initial: e0.iter().cloned().collect(),
        sizes: Vec::new(),
        survivors: Vec::new(),
        cap: 0.0,
    };
    if e0.is_empty() {
        return Ok(res);
    }
    let (lambda, l0) = pf_lengths(m, tol)?;
    let total: f64 = l0.iter().sum();
    let maps = seq.rotated_maps()?;
    let gates: Vec<_> = maps.iter().map(|g| g.gates()).collect();
    // Length of a G_i edge = length of its remaining image in G_0, over λ.
    let lengths: Vec<Vec<f64>> =
        seq.remaining.iter().map(|r| r.iter().map(|p| length_with(&l0, p) / lambda).collect()).collect();
    let caps: Vec<f64> =
        lengths.iter().map(|l| 2.0 * total + 2.0 * l.iter().cloned().fold(0.0, f64::max) + 10.0 * tol).collect();
    res.cap = caps.iter().cloned().fold(0.0, f64::max);
    let tinv = seq.terminal_inverse();
    let k = seq.len();
    let mut seen: BTreeSet<Vec<EdgePath>> = BTreeSet::new();
    let mut cur = e0;
    seen.insert(cur.iter().cloned().collect());
    for round in 1..=max_back {
        res.rounds = round;
        let mut s: BTreeSet<EdgePath> = cur.iter().map(|p| canonical(&tinv.apply(p))).collect();
        for i in (1..=k).rev() {
            s = pullback_one_illegal(&seq, i, &gates[i], &gates[i - 1], &s, Some(&lengths[i - 1]), caps[i - 1])?;
            res.steps += 1;
            if matches!(seq.stages[i - 1], Stage::Fold { .. }) {
                res.fold_steps += 1;
            }
            res.sizes.push(s.len());
            if s.is_empty() {
                res.outcome = EliminationOutcome::Empty;
                return Ok(res);
            }
        }
        if k == 0 {
            // An isomorphism: the set is permuted by the terminal map only.
            res.steps += 1;
            res.sizes.push(s.len());
        }
        let frozen: Vec<EdgePath> = s.iter().cloned().collect();
        if !seen.insert(frozen.clone()) {
            res.outcome = EliminationOutcome::Survivors;
            res.survivors = frozen;
            return Ok(res);
        }
        cur = s;
    }
    res.outcome = EliminationOutcome::Exhausted;
    res.survivors = cur.into_iter().collect();
    Ok(res)
}

// ---------------------------------------------------------------------------
// Folding along Nielsen paths

/// Folds the illegal turn of a (power-1) indivisible Nielsen path: the two
/// directions are split until their images agree and then folded. Returns
/// the new map and the image of the path, which is again Nielsen.
pub fn fold_inp(h: &GraphSelfMap, rho: &NielsenPath) -> Result<(GraphSelfMap, EdgePath), NielsenError> {
    if rho.power != 1 || !is_nielsen_path(h, &rho.path, 1) || h.gates().illegal_count(&rho.path) != 1 {
        return Err(NielsenError::NotVerifiedNielsen);
    }
    let k = h.gates().illegal_positions(&rho.path)[0];
    let (mut a, mut b) = (rho.path[k - 1].rev(), rho.path[k]);
    let mut cur = h.clone();
    let mut path = rho.path.clone();
    loop {
        let (ia, ib) = (cur.image(a), cur.image(b));
        if ia == ib {
            break;
        }
        let n = ia.iter().zip(&ib).take_while(|(x, y)| x == y).count();
        let d = if ia.len() > n { a } else { b };
        let im = cur.image(d);
        let kk = if d.forward { n } else { im.len() - n };
        let (nh, rel) = split_edge_at_image(&cur, d.edge, kk)?;
        path = rel.apply(&path);
        a = rel.image_of(a)[0];
        b = rel.image_of(b)[0];
        cur = nh;
    }
    let st = Stage::Fold { keep: cur.graph().token(a), drop: cur.graph().token(b) };
    let (ng, rel) = crate::folds::apply_stage(cur.graph(), &st)?;
    let keep_edges: Vec<usize> = (0..cur.graph().edge_count()).filter(|&e| e != b.edge).collect();
    let eimg: Vec<EdgePath> = keep_edges.iter().map(|&e| rel.apply(cur.edge_image(e))).collect();
    let mut vimg = vec![0; ng.vertex_count()];
    for v in 0..cur.graph().vertex_count() {
        vimg[rel.vertex_image[v]] = rel.vertex_image[cur.vertex_image(v)];
    }
    let out = GraphSelfMap::new(ng, vimg, eimg)?;
    Ok((out, rel.apply(&path)))
}

/// Identifies the two legal halves of an indivisible Nielsen path along
/// their whole length (the limit of repeated [`fold_inp`]). The halves are
/// first subdivided so that their breakpoints, and the point mapping to the
/// end of the cancelled segment, correspond. `lengths` are PF lengths of
/// `h`.
pub fn collapse_inp(
    h: &GraphSelfMap,
    lengths: &[f64],
    lambda: f64,
    rho: &NielsenPath,
) -> Result<GraphSelfMap, NielsenError> {
    if !is_nielsen_path(h, &rho.path, rho.power) || rho.power != 1 {
        return Err(NielsenError::NotVerifiedNielsen);
    }
    let (mut ra, mut rb) = (rho.alpha(), rho.beta());
    let s = ray_len(lengths, &ra);
    let mut lengths = lengths.to_vec();
    let img = |h: &GraphSelfMap, p: &[OrientedEdge]| -> EdgePath { p.iter().flat_map(|&o| h.image(o)).collect() };
    let cuts = |r: &[OrientedEdge], l: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::new();
        for &o in r {
            acc += l[o.edge];
            if acc < s - SNAP {
                out.push(acc);
            }
        }
        out
    };
    let (ha, hb) = (img(h, &ra), img(h, &rb));
    let p = ha.iter().zip(&hb).take_while(|(x, y)| x == y).count();
    let t = ray_len(&lengths, &ha[..p]);
    let mut pts: Vec<f64> = cuts(&ra, &lengths);
    pts.extend(cuts(&rb, &lengths));
    pts.push(t / lambda);
    pts.push(s);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() < SNAP);
    let mut cur = h.clone();
    'again: loop {
        for which in 0..2 {
            let ray = if which == 0 { &ra } else { &rb };
            for &u in &pts {
                let mut acc = 0.0;
                for &z in ray.iter() {
                    let l = lengths[z.edge];
                    if (acc - u).abs() < SNAP {
                        break;
                    }
                    if u < acc + l - SNAP {
                        let off = u - acc;
                        let pos = if z.forward { off } else { l - off };
                        let e = z.edge;
                        let im = cur.edge_image(e).clone();
                        let target = lambda * pos;
                        let mut run = 0.0;
                        let mut k = None;
                        for (j, x) in im.iter().enumerate() {
                            if j > 0 && (run - target).abs() < 1e-7 {
                                k = Some(j);
                                break;
                            }
                            run += lengths[x.edge];
                        }
                        let k = k.ok_or(NielsenError::NotVertexPreimage(u))?;
                        let first = ray_len(&lengths, &im[..k]) / lambda;
                        let (nh, rel) = split_edge_at_image(&cur, e, k)?;
                        let old = lengths[e];
                        lengths[e] = first;
                        lengths.push(old - first);
                        ra = rel.apply(&ra);
                        rb = rel.apply(&rb);
                        cur = nh;
                        continue 'again;
                    }
                    acc += l;
                }
            }
        }
        break;
    }
    let trunc = |r: &EdgePath| -> EdgePath {
        let mut acc = 0.0;
        let mut out = Vec::new();
        for &o in r {
            if acc >= s - SNAP {
                break;
            }
            out.push(o);
            acc += lengths[o.edge];
        }
        out
    };
    let (ta, tb) = (trunc(&ra), trunc(&rb));
    if ta.len() != tb.len() {
        return Err(NielsenError::Inconsistent("halves have different combinatorics".into()));
    }
    quotient_identify(&cur, &ta, &tb)
}

/// Quotient of `h` identifying the paths `a` and `b` edge by edge.
fn quotient_identify(h: &GraphSelfMap, a: &[OrientedEdge], b: &[OrientedEdge]) -> Result<GraphSelfMap, NielsenError> {
    let g = h.graph();
    let nd = g.direction_count();
    let nv = g.vertex_count();
    // Union-find over directions then vertices.
    let mut parent: Vec<usize> = (0..nd + nv).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let union = |p: &mut Vec<usize>, x: usize, y: usize| {
        let (x, y) = (find(p, x), find(p, y));
        if x != y {
            let (lo, hi) = (x.min(y), x.max(y));
            p[hi] = lo;
        }
    };
    for (&x, &y) in a.iter().zip(b) {
        union(&mut parent, x.index(), y.index());
        union(&mut parent, x.rev().index(), y.rev().index());
        union(&mut parent, nd + g.init(x), nd + g.init(y));
        union(&mut parent, nd + g.term(x), nd + g.term(y));
    }
    // A class and its reverse class must differ.
    for d in 0..nd {
        let o = OrientedEdge::from_index(d);
        if find(&mut parent, o.index()) == find(&mut parent, o.rev().index()) {
            return Err(NielsenError::Inconsistent(format!("edge `{}` folds onto its reverse", g.edge_name(o.edge))));
        }
    }
    // Representative edge per class: the smallest edge index in the class or
    // its reverse.
    let mut new_edge_of_class: BTreeMap<usize, OrientedEdge> = BTreeMap::new();
    let mut keep_edges = Vec::new();
    for e in 0..g.edge_count() {
        let (cf, cb) =
            (find(&mut parent, OrientedEdge::fwd(e).index()), find(&mut parent, OrientedEdge::bwd(e).index()));
        if new_edge_of_class.contains_key(&cf) {
            continue;
        }
        let idx = keep_edges.len();
        keep_edges.push(e);
        new_edge_of_class.insert(cf, OrientedEdge::fwd(idx));
        new_edge_of_class.insert(cb, OrientedEdge::bwd(idx));
    }
    let mut vclass: BTreeMap<usize, usize> = BTreeMap::new();
    let mut keep_vertices = Vec::new();
    for v in 0..nv {
        let c = find(&mut parent, nd + v);
        if let std::collections::btree_map::Entry::Vacant(x) = vclass.entry(c) {
            x.insert(keep_vertices.len());
            keep_vertices.push(v);
        }
    }
    let mut q = |o: OrientedEdge| new_edge_of_class[&find(&mut parent, o.index())];
    let qpath = |p: &[OrientedEdge], q: &mut dyn FnMut(OrientedEdge) -> OrientedEdge| -> EdgePath {
        crate::graphs::reduce_steps(&p.iter().map(|&o| q(o)).collect::<Vec<_>>())
    };
    let mut eimg = Vec::new();
    for &e in &keep_edges {
        eimg.push(qpath(h.edge_image(e), &mut q));
    }
    for e in 0..g.edge_count() {
        let o = q(OrientedEdge::fwd(e));
        let want = qpath(h.edge_image(e), &mut q);
        let have = if o.forward { eimg[o.edge].clone() } else { reverse_path(&eimg[o.edge]) };
        if want != have {
            return Err(NielsenError::Inconsistent(format!("images of `{}` disagree", g.edge_name(e))));
        }
    }
    let mut vq = |v: usize| vclass[&find(&mut parent, nd + v)];
    let vimg: Vec<usize> = keep_vertices.iter().map(|&v| vq(h.vertex_image(v))).collect();
    let vertices: Vec<String> = keep_vertices.iter().map(|&v| g.vertex_name(v).to_string()).collect();
    let edges: Vec<crate::graphs::Edge> = keep_edges
        .iter()
        .map(|&e| {
            let ed = &g.edges()[e];
            crate::graphs::Edge { name: ed.name.clone(), from: vq(ed.from), to: vq(ed.to) }
        })
        .collect();
    let ng = crate::graphs::MarkedGraph::from_parts(vertices, edges)?;
    if ng.rank() != g.rank() {
        return Err(NielsenError::Inconsistent("quotient changes the rank".into()));
    }
    Ok(GraphSelfMap::new(ng, vimg, eimg)?)
}

// ---------------------------------------------------------------------------
// Classification

pub const NONGEOMETRIC_STATEMENT: &str = "the tree T₊ is nongeometric";
pub const NO_NIELSEN_SUMMARY: &str = "fully irreducible, nongeometric: φ is neither geometric nor parageometric";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "reason")]
pub enum Verdict {
    NoPeriodicNielsenPath,
    GeometricCandidate,
    ParageometricCandidate,
    Indeterminate(String),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::NoPeriodicNielsenPath => "NoPeriodicNielsenPath",
            Verdict::GeometricCandidate => "GeometricCandidate",
            Verdict::ParageometricCandidate => "ParageometricCandidate",
            Verdict::Indeterminate(_) => "Indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    /// The unique indivisible Nielsen path, on the map's own graph.
    pub inp: Option<NielsenPath>,
    /// Traversals of each edge by the Nielsen path (either orientation).
    pub edge_counts: Vec<usize>,
    pub power_bound: usize,
    /// Number of indivisible Nielsen paths found for each power.
    pub counts_per_power: Vec<usize>,
    pub elimination: Option<Elimination>,
    pub statements: Vec<String>,
    pub notes: Vec<String>,
}

fn indeterminate(reason: impl Into<String>, power_bound: usize) -> Classification {
    Classification {
        verdict: Verdict::Indeterminate(reason.into()),
        inp: None,
        edge_counts: Vec::new(),
        power_bound,
        counts_per_power: Vec::new(),
        elimination: None,
        statements: Vec::new(),
        notes: Vec::new(),
    }
}

pub fn edge_counts(edge_count: usize, p: &[OrientedEdge]) -> Vec<usize> {
    let mut c = vec![0; edge_count];
    for o in p {
        c[o.edge] += 1;
    }
    c
}

/// The trichotomy: no periodic Nielsen paths; a unique indivisible one that
/// is closed (geometric candidate); or a unique one that is not closed and
/// crosses some edge once (parageometric candidate). The power bound used is
/// `min(power_bound, lcm of periodic direction periods)`.
pub fn classify(m: &GraphSelfMap, power_bound: usize, max_back: usize, tol: f64) -> Classification {
    if !m.is_train_track().train_track {
        return indeterminate("NotTrainTrack", 0);
    }
    let gates = m.gates();
    let bound = (gates.period_lcm as usize).min(power_bound).max(1);
    if !is_primitive(&transition_matrix(m)) {
        return indeterminate("transition matrix is not primitive", bound);
    }
    let g = m.graph();
    if let Some(v) = (0..g.vertex_count()).find(|&v| !m.local_whitehead_graph(v).connected) {
        return indeterminate(format!("local Whitehead graph at `{}` is disconnected", g.vertex_name(v)), bound);
    }
    let elim = match nielsen_elimination(m, max_back, tol) {
        Ok(e) => e,
        Err(e) => return indeterminate(format!("elimination failed: {e}"), bound),
    };
    let mut c = indeterminate("", bound);
    let notes = vec![
        "irreducibility, primitivity and connected Whitehead graphs are checked sufficient conditions for full irreducibility".to_string(),
    ];
    c.notes = notes;
    if elim.outcome == EliminationOutcome::Empty {
        c.verdict = Verdict::NoPeriodicNielsenPath;
        c.statements = vec![NONGEOMETRIC_STATEMENT.to_string(), NO_NIELSEN_SUMMARY.to_string()];
        c.elimination = Some(elim);
        return c;
    }
    c.elimination = Some(elim);
    let searches = match find_inp(m, bound, InpSearchOptions::default(), tol) {
        Ok(s) => s,
        Err(e) => {
            c.verdict = Verdict::Indeterminate(format!("Nielsen path search failed: {e}"));
            return c;
        }
    };
    c.counts_per_power = searches.iter().map(|s| s.inps.len()).collect();
    let mut base_paths: BTreeSet<EdgePath> = BTreeSet::new();
    for s in &searches {
        for n in &s.inps {
            match s.subdivision.to_original(&n.path) {
                Some(p) => {
                    base_paths.insert(canonical(&p));
                }
                None => {
                    c.verdict = Verdict::Indeterminate(format!(
                        "a Nielsen path of g^{} has endpoints off the vertices",
                        s.power
                    ));
                    return c;
                }
            }
        }
    }
    if c.counts_per_power.iter().any(|&k| k != 1) || base_paths.len() != 1 {
        c.verdict = Verdict::Indeterminate(format!(
            "not Nielsen-unique: indivisible Nielsen paths per power {:?}",
            c.counts_per_power
        ));
        return c;
    }
    let path = base_paths.into_iter().next().unwrap();
    let (_, l0) = match pf_lengths(m, tol) {
        Ok(x) => x,
        Err(e) => {
            c.verdict = Verdict::Indeterminate(e.to_string());
            return c;
        }
    };
    let total: f64 = l0.iter().sum();
    let len = length_with(&l0, &path);
    let ill = gates.illegal_count(&path);
    if ill != 1 || (len - 2.0 * total).abs() > LENGTH_REL_TOL * total {
        c.verdict = Verdict::Indeterminate(format!(
            "Nielsen path has {ill} illegal turns and length {len} (expected 2L = {})",
            2.0 * total
        ));
        return c;
    }
    let split = gates.illegal_positions(&path)[0];
    let closed = g.init(path[0]) == g.term(*path.last().unwrap());
    let counts = edge_counts(g.edge_count(), &path);
    c.edge_counts = counts.clone();
    c.inp = Some(NielsenPath { path, power: 1, split, closed, length: len });
    if closed {
        c.verdict = Verdict::GeometricCandidate;
        c.statements.push("ρ is a closed path".into());
        if counts.iter().all(|&k| k == 2) {
            c.statements.push("ρ traverses every edge of G exactly twice".into());
        }
    } else if let Some(e) = counts.iter().position(|&k| k == 1) {
        c.verdict = Verdict::ParageometricCandidate;
        c.statements.push("ρ is not a closed path".into());
        c.statements.push(format!("ρ traverses the edge `{}` exactly once", g.edge_name(e)));
        if let Some(f) = counts.iter().position(|&k| k >= 3) {
            c.statements.push(format!("ρ traverses the edge `{}` {} times", g.edge_name(f), counts[f]));
        }
    } else {
        c.verdict = Verdict::Indeterminate("ρ is not closed but crosses no edge exactly once".into());
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::MarkedGraph;

    fn phi() -> GraphSelfMap {
        GraphSelfMap::rose(&[("A", "A C"), ("B", "A"), ("C", "B")]).unwrap()
    }

    #[test]
    fn fixed_subdivision_of_phi() {
        let s = subdivide_fixed(&phi()).unwrap();
        // A → A C: the forward occurrence at the start is the fixed vertex.
        assert_eq!(s.map.graph().edge_count(), 3);
        let s4 = subdivide_fixed(&phi().power(4).unwrap()).unwrap();
        assert!(s4.map.graph().edge_count() > 3);
        let a = s4.relabel.image_of(OrientedEdge::fwd(0));
        assert_eq!(s4.to_original(&a), Some(vec![OrientedEdge::fwd(0)]));
    }

    #[test]
    fn nielsen_path_basics() {
        let m = phi();
        assert!(is_nielsen_constant(&m, 0, 1));
        let a = vec![OrientedEdge::fwd(0)];
        assert!(!is_nielsen_path(&m, &a, 1));
    }

    #[test]
    fn isomorphism_empties_immediately() {
        let g = MarkedGraph::rose(&["a", "b"]).unwrap();
        let swap = GraphSelfMap::new(g, vec![0], vec![vec![OrientedEdge::fwd(1)], vec![OrientedEdge::fwd(0)]]).unwrap();
        let e = nielsen_elimination(&swap, 4, 1e-10).unwrap();
        assert_eq!(e.outcome, EliminationOutcome::Empty);
        assert_eq!(e.steps, 0);
    }

    #[test]
    fn non_train_track_is_indeterminate() {
        let m = GraphSelfMap::rose(&[("a", "a b"), ("b", "~a")]).unwrap();
        let c = classify(&m, 4, 8, 1e-10);
        assert_eq!(c.verdict, Verdict::Indeterminate("NotTrainTrack".into()));
    }
}
