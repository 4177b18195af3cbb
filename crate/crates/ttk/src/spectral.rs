#![allow(clippy::needless_range_loop)]
//! Transition matrices, Perron–Frobenius data, eigen-metrics and preimage
//! counting.
//!
//! Convention: `M[e][e']` counts the occurrences of `e` (either orientation)
//! in the image of `e'`. The eigen-metric is therefore the PF eigenvector of
//! `Mᵀ`, since `Length(g(e')) = Σ_e M[e][e'] Length(e)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{length_with, MarkedGraph};
use crate::maps::GraphSelfMap;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const ITERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix is not irreducible")]
    NotIrreducible,
    #[error("power iteration did not converge after {iterations} steps (bracket {lower}..{upper})")]
    NoConvergence { iterations: usize, lower: f64, upper: f64 },
    #[error("map is not a train track map")]
    NotTrainTrack,
    #[error("transition matrix is not primitive")]
    NotPrimitive,
    #[error("integer overflow in matrix power")]
    Overflow,
    #[error("unknown index `{0}`")]
    UnknownIndex(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub index: Vec<String>,
    pub rows: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfData {
    pub lambda: f64,
    /// Right eigenvector `M v = λ v`, entries summing to 1.
    pub eigenvector: Vec<f64>,
    pub index: Vec<String>,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub irreducible: bool,
    pub primitive: bool,
    /// Largest real root of the characteristic polynomial (dim ≤ 6).
    pub charpoly_root: Option<f64>,
}

impl TransitionMatrix {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn identity(index: Vec<String>) -> Self {
        let n = index.len();
        let rows = (0..n).map(|i| (0..n).map(|j| u64::from(i == j)).collect()).collect();
        TransitionMatrix { index, rows }
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim();
        let rows = (0..n).map(|i| (0..n).map(|j| self.rows[j][i]).collect()).collect();
        TransitionMatrix { index: self.index.clone(), rows }
    }

    pub fn position(&self, name: &str) -> Result<usize, SpectralError> {
        self.index.iter().position(|x| x == name).ok_or_else(|| SpectralError::UnknownIndex(name.to_string()))
    }

    pub fn mul(&self, other: &TransitionMatrix) -> Result<TransitionMatrix, SpectralError> {
        let n = self.dim();
        let mut rows = vec![vec![0u64; n]; n];
        for i in 0..n {
            for k in 0..n {
                let a = self.rows[i][k];
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    let t = a.checked_mul(other.rows[k][j]).ok_or(SpectralError::Overflow)?;
                    rows[i][j] = rows[i][j].checked_add(t).ok_or(SpectralError::Overflow)?;
                }
            }
        }
        Ok(TransitionMatrix { index: self.index.clone(), rows })
    }

    pub fn pow(&self, n: u32) -> Result<TransitionMatrix, SpectralError> {
        let mut r = TransitionMatrix::identity(self.index.clone());
        for _ in 0..n {
            r = r.mul(self)?;
        }
        Ok(r)
    }

    /// Principal submatrix on the given positions.
    pub fn restrict(&self, keep: &[usize]) -> TransitionMatrix {
        TransitionMatrix {
            index: keep.iter().map(|&i| self.index[i].clone()).collect(),
            rows: keep.iter().map(|&i| keep.iter().map(|&j| self.rows[i][j]).collect()).collect(),
        }
    }

    fn as_f64(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect()
    }

    /// Block-diagonal sum.
    pub fn direct_sum(&self, other: &TransitionMatrix) -> TransitionMatrix {
        let (n, m) = (self.dim(), other.dim());
        let mut rows = vec![vec![0u64; n + m]; n + m];
        for i in 0..n {
            rows[i][..n].copy_from_slice(&self.rows[i]);
        }
        for i in 0..m {
            rows[n + i][n..].copy_from_slice(&other.rows[i]);
        }
        let mut index = self.index.clone();
        index.extend(other.index.iter().cloned());
        TransitionMatrix { index, rows }
    }
}

pub fn transition_matrix(m: &GraphSelfMap) -> TransitionMatrix {
    let g = m.graph();
    let n = g.edge_count();
    let mut rows = vec![vec![0u64; n]; n];
    for j in 0..n {
        for o in m.edge_image(j) {
            rows[o.edge][j] += 1;
        }
    }
    TransitionMatrix { index: (0..n).map(|e| g.edge_name(e).to_string()).collect(), rows }
}

/// Strongly connected components of the digraph `i → j` iff `M[i][j] > 0`.
pub fn strong_components(m: &TransitionMatrix) -> Vec<Vec<usize>> {
    let n = m.dim();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| m.rows[i][j] > 0).collect()).collect();
    // Kosaraju, iterative.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((v, k)) = stack.pop() {
            if k < adj[v].len() {
                stack.push((v, k + 1));
                let w = adj[v][k];
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }
    let mut radj = vec![Vec::new(); n];
    for (i, a) in adj.iter().enumerate() {
        for &j in a {
            radj[j].push(i);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &radj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

pub fn is_irreducible(m: &TransitionMatrix) -> bool {
    m.dim() > 0 && strong_components(m).len() == 1 && (m.dim() > 1 || m.rows[0][0] > 0)
}

/// Some power `M^k`, `k ≤ (n−1)²+1`, is entrywise positive.
pub fn is_primitive(m: &TransitionMatrix) -> bool {
    let n = m.dim();
    if n == 0 {
        return false;
    }
    let b: Vec<Vec<bool>> = m.rows.iter().map(|r| r.iter().map(|&x| x > 0).collect()).collect();
    let mut p = b.clone();
    let bound = (n - 1) * (n - 1) + 1;
    for _ in 0..bound {
        if p.iter().all(|r| r.iter().all(|&x| x)) {
            return true;
        }
        let mut q = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if p[i][k] {
                    for j in 0..n {
                        q[i][j] |= b[k][j];
                    }
                }
            }
        }
        p = q;
    }
    p.iter().all(|r| r.iter().all(|&x| x))
}

struct PowerResult {
    lambda: f64,
    vector: Vec<f64>,
    lower: f64,
    upper: f64,
    iterations: usize,
}

/// Power iteration on `A + I` (primitive whenever `A` is irreducible) with
/// Collatz–Wielandt bracketing.
fn power_iteration(a: &[Vec<f64>], tol: f64) -> Result<PowerResult, SpectralError> {
    let n = a.len();
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for it in 1..=ITERATION_CAP {
        for i in 0..n {
            w[i] = v[i] + a[i].iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        }
        lo = f64::INFINITY;
        hi = 0.0f64;
        for i in 0..n {
            let r = w[i] / v[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let s: f64 = w.iter().sum();
        for i in 0..n {
            v[i] = w[i] / s;
        }
        let width = hi - lo;
        if width < tol || width <= 64.0 * f64::EPSILON * hi {
            return Ok(PowerResult {
                lambda: 0.5 * (lo + hi) - 1.0,
                vector: v,
                lower: lo - 1.0,
                upper: hi - 1.0,
                iterations: it,
            });
        }
    }
    Err(SpectralError::NoConvergence { iterations: ITERATION_CAP, lower: lo - 1.0, upper: hi - 1.0 })
}

pub fn pf_eigen(m: &TransitionMatrix, tol: f64) -> Result<PfData, SpectralError> {
    if !is_irreducible(m) {
        return Err(SpectralError::NotIrreducible);
    }
    let r = power_iteration(&m.as_f64(), tol)?;
    let charpoly_root = (m.dim() <= 6).then(|| largest_real_root(&charpoly(m), 1e-13));
    Ok(PfData {
        lambda: r.lambda,
        eigenvector: r.vector,
        index: m.index.clone(),
        lower: r.lower,
        upper: r.upper,
        iterations: r.iterations,
        tolerance: tol,
        irreducible: true,
        primitive: is_primitive(m),
        charpoly_root,
    })
}

/// Maximum PF eigenvalue over strongly connected components; 0 if nilpotent.
pub fn spectral_radius(m: &TransitionMatrix, tol: f64) -> Result<f64, SpectralError> {
    let mut best = 0.0f64;
    for c in strong_components(m) {
        let sub = m.restrict(&c);
        if c.len() == 1 {
            best = best.max(sub.rows[0][0] as f64);
            continue;
        }
        best = best.max(power_iteration(&sub.as_f64(), tol)?.lambda);
    }
    Ok(best)
}

/// Characteristic polynomial `det(xI − M)`, leading coefficient first.
/// Faddeev–LeVerrier; all divisions are exact over the integers.
pub fn charpoly(m: &TransitionMatrix) -> Vec<i128> {
    let n = m.dim();
    let a: Vec<Vec<i128>> = m.rows.iter().map(|r| r.iter().map(|&x| i128::from(x)).collect()).collect();
    let mut coeffs = vec![1i128];
    let mut mk = vec![vec![0i128; n]; n];
    let mut c = 1i128;
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I
        let mut next = vec![vec![0i128; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0;
                for l in 0..n {
                    s += a[i][l] * mk[l][j];
                }
                next[i][j] = s + if i == j { c } else { 0 };
            }
        }
        mk = next;
        let mut tr = 0;
        for i in 0..n {
            for l in 0..n {
                tr += a[i][l] * mk[l][i];
            }
        }
        c = -tr / k as i128;
        coeffs.push(c);
    }
    coeffs
}

pub fn eval_poly(p: &[i128], x: f64) -> f64 {
    p.iter().fold(0.0, |acc, &c| acc * x + c as f64)
}

/// Largest real root of a monic integer polynomial, by scanning down from a
/// Cauchy bound to the first sign change and bisecting.
pub fn largest_real_root(p: &[i128], tol: f64) -> f64 {
    let bound = 1.0 + p[1..].iter().map(|c| c.unsigned_abs() as f64).fold(0.0, f64::max);
    let steps = 20_000;
    let h = bound / steps as f64;
    let mut hi = bound;
    let mut fhi = eval_poly(p, hi);
    for k in (0..steps).rev() {
        let lo = k as f64 * h;
        let flo = eval_poly(p, lo);
        if flo == 0.0 {
            return lo;
        }
        if (flo < 0.0) != (fhi < 0.0) {
            let (mut a, mut b) = (lo, hi);
            while b - a > tol {
                let mid = 0.5 * (a + b);
                // Below float resolution at this magnitude.
                if mid <= a || mid >= b {
                    break;
                }
                if (eval_poly(p, mid) < 0.0) == (flo < 0.0) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return 0.5 * (a + b);
        }
        hi = lo;
        fhi = flo;
    }
    0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenMetric {
    pub lambda: f64,
    /// Edge lengths summing to 1.
    pub lengths: Vec<f64>,
    /// max_e |Length(g(e)) − λ·Length(e)|.
    pub max_stretch_residual: f64,
}

impl EigenMetric {
    pub fn total(&self) -> f64 {
        self.lengths.iter().sum()
    }
}

/// PF lengths for a primitive train track map, with the stretch check.
pub fn eigen_metric(m: &GraphSelfMap, tol: f64) -> Result<EigenMetric, SpectralError> {
    if !m.is_train_track().train_track {
        return Err(SpectralError::NotTrainTrack);
    }
    let mt = transition_matrix(m);
    if !is_primitive(&mt) {
        return Err(SpectralError::NotPrimitive);
    }
    metric_unchecked(m, tol)
}

/// PF lengths without the train-track/primitivity preconditions (irreducible
/// suffices).
pub fn metric_unchecked(m: &GraphSelfMap, tol: f64) -> Result<EigenMetric, SpectralError> {
    let mt = transition_matrix(m).transpose();
    if !is_irreducible(&mt) {
        return Err(SpectralError::NotIrreducible);
    }
    let r = power_iteration(&mt.as_f64(), tol)?;
    let lengths = r.vector;
    let max_stretch_residual = (0..lengths.len())
        .map(|e| (length_with(&lengths, m.edge_image(e)) - r.lambda * lengths[e]).abs())
        .fold(0.0, f64::max);
    Ok(EigenMetric { lambda: r.lambda, lengths, max_stretch_residual })
}

impl EigenMetric {
    pub fn apply_to(&self, g: &MarkedGraph) -> MarkedGraph {
        g.clone().with_metric(self.lengths.clone()).expect("PF lengths are positive")
    }
}

/// Number of preimages under `gⁿ` of an interior point of `e`:
/// `Σ_{e'} Mⁿ[e][e']`, i.e. the total number of occurrences of `e` in the
/// `n`-th iterated images.
pub fn preimage_count(m: &TransitionMatrix, e: usize, n: u32) -> Result<u128, SpectralError> {
    let d = m.dim();
    let mut row = vec![0u128; d];
    row[e] = 1;
    for _ in 0..n {
        let mut next = vec![0u128; d];
        for (k, &rk) in row.iter().enumerate() {
            if rk == 0 {
                continue;
            }
            for j in 0..d {
                let t = rk.checked_mul(u128::from(m.rows[k][j])).ok_or(SpectralError::Overflow)?;
                next[j] = next[j].checked_add(t).ok_or(SpectralError::Overflow)?;
            }
        }
        row = next;
    }
    row.iter().try_fold(0u128, |s, &x| s.checked_add(x).ok_or(SpectralError::Overflow))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_roots_terminate() {
        // x - 12345.678… cannot be bracketed to 1e-13 in f64.
        let p = [1, -1_000_000_007];
        let r = largest_real_root(&p, 1e-13);
        assert!((r - 1_000_000_007.0).abs() < 1e-3);
    }

    fn phi() -> GraphSelfMap {
        GraphSelfMap::rose(&[("A", "A C"), ("B", "A"), ("C", "B")]).unwrap()
    }

    fn phi_inv() -> GraphSelfMap {
        GraphSelfMap::rose(&[("A", "B"), ("B", "C"), ("C", "~B A")]).unwrap()
    }

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) < 0.0) == (f(a) < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn phi_matrix_and_charpoly() {
        let m = transition_matrix(&phi());
        assert_eq!(m.rows, vec![vec![1, 1, 0], vec![0, 0, 1], vec![1, 0, 0]]);
        assert_eq!(charpoly(&m), vec![1, -1, 0, -1]);
        assert_eq!(charpoly(&transition_matrix(&phi_inv())), vec![1, 0, -1, -1]);
        // Transposed display convention, same polynomial.
        assert_eq!(charpoly(&m.transpose()), vec![1, -1, 0, -1]);
    }

    #[test]
    fn phi_pf_matches_bisection() {
        let oracle = bisect(|x| x * x * x - x * x - 1.0, 1.0, 2.0);
        let pf = pf_eigen(&transition_matrix(&phi()), DEFAULT_TOL).unwrap();
        assert!((pf.lambda - oracle).abs() < 1e-9);
        assert!(pf.lower <= pf.lambda && pf.lambda <= pf.upper);
        assert!((pf.charpoly_root.unwrap() - oracle).abs() < 1e-9);
        assert!(pf.primitive && pf.lambda > 1.4);
        let inv = pf_eigen(&transition_matrix(&phi_inv()), DEFAULT_TOL).unwrap();
        let oracle = bisect(|x| x * x * x - x - 1.0, 1.0, 2.0);
        assert!((inv.lambda - oracle).abs() < 1e-9 && inv.lambda < 1.4);
    }

    #[test]
    fn identity_is_reducible() {
        let id = TransitionMatrix::identity(vec!["a".into(), "b".into()]);
        assert!(!is_irreducible(&id));
        assert_eq!(pf_eigen(&id, DEFAULT_TOL), Err(SpectralError::NotIrreducible));
        let id_map = GraphSelfMap::identity(phi().graph().clone());
        assert_eq!(eigen_metric(&id_map, DEFAULT_TOL), Err(SpectralError::NotPrimitive));
    }

    #[test]
    fn spectral_radius_cases() {
        let z = TransitionMatrix { index: vec!["a".into(), "b".into()], rows: vec![vec![0, 1], vec![0, 0]] };
        assert_eq!(spectral_radius(&z, DEFAULT_TOL).unwrap(), 0.0);
        let a = transition_matrix(&phi());
        let b = transition_matrix(&phi_inv());
        let s = spectral_radius(&a.direct_sum(&b), DEFAULT_TOL).unwrap();
        let l = pf_eigen(&a, DEFAULT_TOL).unwrap().lambda;
        assert!((s - l).abs() < 1e-9);
    }

    #[test]
    fn metric_stretch() {
        let m = phi();
        let em = eigen_metric(&m, DEFAULT_TOL).unwrap();
        assert!(em.max_stretch_residual < 1e-9);
        for e in 0..3 {
            let ratio = length_with(&em.lengths, m.edge_image(e)) / em.lengths[e];
            assert!((ratio - em.lambda).abs() < 1e-8);
        }
    }

    #[test]
    fn preimage_counts() {
        let m = transition_matrix(&phi());
        assert_eq!(preimage_count(&m, 0, 0).unwrap(), 1);
        assert_eq!(preimage_count(&m, 0, 1).unwrap(), 2);
    }

    #[test]
    fn imprimitive_irreducible() {
        // A 2-cycle: irreducible, not primitive, λ = 1.
        let c = TransitionMatrix { index: vec!["a".into(), "b".into()], rows: vec![vec![0, 1], vec![1, 0]] };
        assert!(is_irreducible(&c) && !is_primitive(&c));
        assert!((pf_eigen(&c, DEFAULT_TOL).unwrap().lambda - 1.0).abs() < 1e-9);
    }
}
