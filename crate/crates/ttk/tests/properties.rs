mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use ttk::folds::{
    canonical, fold_factorization, invert_automorphism, is_inverse_pair, pullback_one_illegal, verify_factorization,
    Stage,
};
use ttk::graphs::{length_with, reduce_steps, OrientedEdge};
use ttk::maps::GraphSelfMap;
use ttk::nielsen::{classify, fold_inp, inp_brute_force, inp_rays, is_nielsen_path, subdivide_fixed, Verdict};
use ttk::spectral::{
    eigen_metric, is_primitive, metric_unchecked, pf_eigen, preimage_count, transition_matrix, TransitionMatrix,
};
use ttk::wedge::{brute_force_walks, build_wedge, leaf_graph, nonfree_subgraph};
use ttk::words::{apply_automorphism, FreeWord};

fn word() -> impl Strategy<Value = FreeWord> {
    prop::collection::vec((0usize..3, any::<bool>()), 0..30)
        .prop_map(|v| FreeWord(v.into_iter().map(|(edge, forward)| OrientedEdge { edge, forward }).collect()))
}

/// Rank-3 Nielsen generators: a swap, an inversion and a transvection.
fn nielsen_generator(k: u8) -> GraphSelfMap {
    let images: [(&str, &str); 3] = match k % 6 {
        0 => [("A", "B"), ("B", "A"), ("C", "C")],
        1 => [("A", "A"), ("B", "C"), ("C", "B")],
        2 => [("A", "~A"), ("B", "B"), ("C", "C")],
        3 => [("A", "A B"), ("B", "B"), ("C", "C")],
        4 => [("A", "A"), ("B", "B"), ("C", "C ~A")],
        _ => [("A", "A"), ("B", "B A"), ("C", "C")],
    };
    GraphSelfMap::rose(&images).unwrap()
}

fn compose_all(maps: &[GraphSelfMap]) -> GraphSelfMap {
    let mut it = maps.iter();
    let mut acc = it.next().unwrap().clone();
    for m in it {
        acc = GraphSelfMap::compose(&acc, m).unwrap();
    }
    acc
}

/// Primitive: a Hamiltonian cycle plus a loop, on top of random entries.
fn primitive_matrix() -> impl Strategy<Value = TransitionMatrix> {
    (2usize..6).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0u64..3, n), n)).prop_map(|mut rows| {
        let n = rows.len();
        for i in 0..n {
            rows[i][(i + 1) % n] = rows[i][(i + 1) % n].max(1);
        }
        rows[0][0] = rows[0][0].max(1);
        TransitionMatrix { index: (0..n).map(|i| format!("e{i}")).collect(), rows }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tighten_is_idempotent(which in 0usize..3, start in 0usize..64, choices in prop::collection::vec(any::<u8>(), 0..24)) {
        let m = [two_vertex(), phi4(), phi()][which].clone();
        let g = m.graph();
        let p = walk(g, start, &choices);
        let t = g.tighten(&p).unwrap();
        prop_assert_eq!(g.tighten(&t).unwrap(), t.clone());
        prop_assert!(t.len() <= p.len() && (p.len() - t.len()).is_multiple_of(2));
    }

    #[test]
    fn reduce_is_idempotent(w in word()) {
        let r = w.reduce();
        prop_assert_eq!(r.reduce(), r.clone());
        let c = r.cyclic_reduce();
        prop_assert_eq!(c.cyclic_reduce(), c.clone());
        prop_assert_eq!(r.mul(&r.inverse()), FreeWord::empty());
    }

    #[test]
    fn automorphisms_are_homomorphisms(u in word(), v in word()) {
        let m = phi();
        let lhs = apply_automorphism(&m, &u.mul(&v)).unwrap();
        let rhs = apply_automorphism(&m, &u).unwrap().mul(&apply_automorphism(&m, &v).unwrap());
        prop_assert_eq!(lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pf_is_transpose_invariant(m in primitive_matrix()) {
        prop_assert!(is_primitive(&m));
        let a = pf_eigen(&m, TOL).unwrap().lambda;
        let b = pf_eigen(&m.transpose(), TOL).unwrap().lambda;
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn pf_of_powers(m in primitive_matrix()) {
        let l = pf_eigen(&m, TOL).unwrap().lambda;
        for n in 1..=4u32 {
            let ln = pf_eigen(&m.pow(n).unwrap(), TOL).unwrap().lambda;
            let want = l.powi(n as i32);
            prop_assert!((ln - want).abs() <= n as f64 * 1e-8 * want.max(1.0), "n={} {} vs {}", n, ln, want);
        }
    }

    #[test]
    fn preimage_counts_are_walk_counts(m in primitive_matrix(), n in 0u32..=8) {
        for e in 0..m.dim() {
            prop_assert_eq!(preimage_count(&m, e, n).unwrap(), brute_force_walks(&m, e, n));
        }
    }

    #[test]
    fn inverting_random_automorphisms(gens in prop::collection::vec(0u8..6, 5)) {
        let phi = compose_all(&gens.iter().map(|&k| nielsen_generator(k)).collect::<Vec<_>>());
        let inv = invert_automorphism(&phi).unwrap();
        prop_assert!(is_inverse_pair(&phi, &inv).unwrap().is_some());
        let back = invert_automorphism(&inv).unwrap();
        prop_assert!(is_inverse_pair(&inv, &back).unwrap().is_some());
        prop_assert!(is_inverse_pair(&back, &inv).unwrap().is_some());
    }

    #[test]
    fn fold_recomposition_on_products(signs in prop::collection::vec(any::<bool>(), 1..4)) {
        let maps: Vec<GraphSelfMap> = signs.iter().map(|&s| if s { phi() } else { phi_inv() }).collect();
        let m = compose_all(&maps);
        let seq = fold_factorization(&m).unwrap();
        prop_assert!(verify_factorization(&seq, &m));
    }

    #[test]
    fn leaf_graphs_are_trees(edge in 0usize..5, frac in 0.01f64..0.99, depth in 0usize..=6) {
        let m = phi4();
        let c = classify(&m, 4, 64, TOL);
        let w = build_wedge(&m, c.inp.as_ref().unwrap(), TOL).unwrap();
        let sub = nonfree_subgraph(&w, TOL).unwrap();
        let e = sub.edge_ids[edge % sub.edge_ids.len()];
        let lg = leaf_graph(&w, e, frac * w.lengths[e], depth).unwrap();
        prop_assert!(lg.acyclic);
        prop_assert!(lg.valences_agree());
        prop_assert_eq!(lg.segments.len() + 1, lg.points.len());
    }
}

#[test]
fn fold_recomposition_on_fixtures() {
    for m in [phi(), phi_inv(), two_vertex(), phi4(), phi().power(3).unwrap()] {
        let seq = fold_factorization(&m).unwrap();
        assert!(verify_factorization(&seq, &m));
    }
}

#[test]
fn eigen_metric_stretches_uniformly() {
    for m in [phi(), phi_inv(), two_vertex(), phi4()] {
        let em = eigen_metric(&m, TOL).unwrap();
        let total = em.total();
        for e in 0..m.graph().edge_count() {
            let r = (length_with(&em.lengths, m.edge_image(e)) - em.lambda * em.lengths[e]).abs();
            assert!(r <= 1e-8 * total, "edge {e}: {r}");
        }
    }
}

/// Pullback through each stage of the two-vertex factorization, compared
/// with a forward-mapping oracle over all short one-illegal-turn paths.
#[test]
fn pullback_is_sound_and_complete_on_short_paths() {
    let m = two_vertex();
    let seq = fold_factorization(&m).unwrap();
    let maps = seq.rotated_maps().unwrap();
    let gates: Vec<_> = maps.iter().map(|g| g.gates()).collect();
    let mut lifted = 0;
    for i in 1..=seq.len() {
        let here = &seq.graphs[i];
        let prev = &seq.graphs[i - 1];
        let rel = &seq.relabels[i - 1];
        let input: BTreeSet<_> = tight_paths(here, 4)
            .into_iter()
            .filter(|p| gates[i].illegal_count(p) == 1)
            .map(|p| canonical(&p))
            .collect();
        let out = pullback_one_illegal(&seq, i, &gates[i], &gates[i - 1], &input, None, f64::INFINITY).unwrap();
        let is_fold = matches!(seq.stages[i - 1], Stage::Fold { .. });
        lifted += out.len();
        for s in &out {
            assert_eq!(gates[i - 1].illegal_count(s), 1);
            let img = canonical(&reduce_steps(&rel.apply(s)));
            if is_fold {
                assert!(input.contains(&img), "stage {i}: {} ↦ {}", prev.format_path(s), here.format_path(&img));
            }
        }
        if is_fold {
            for s in tight_paths(prev, 3) {
                if gates[i - 1].illegal_count(&s) != 1 {
                    continue;
                }
                let img = canonical(&reduce_steps(&rel.apply(&s)));
                if input.contains(&img) {
                    assert!(out.contains(&canonical(&s)), "stage {i}: missed {}", prev.format_path(&s));
                }
            }
        }
    }
    assert!(lifted > 100, "only {lifted} lifts");
}

#[test]
fn pullback_of_nothing_is_nothing() {
    let m = two_vertex();
    let seq = fold_factorization(&m).unwrap();
    let maps = seq.rotated_maps().unwrap();
    let out = pullback_one_illegal(&seq, 1, &maps[1].gates(), &maps[0].gates(), &BTreeSet::new(), None, 1.0).unwrap();
    assert!(out.is_empty());
}

#[test]
fn ray_search_matches_brute_force() {
    let mut checked = 0;
    for (m, q) in [(phi(), 2), (phi(), 4), (phi4(), 1), (phi4(), 2)] {
        let sub = subdivide_fixed(&m.power(q).unwrap()).unwrap();
        let h = &sub.map;
        if h.graph().edge_count() > 12 {
            continue;
        }
        let em = metric_unchecked(h, TOL).unwrap();
        let total: f64 = em.lengths.iter().sum();
        let mut rays: Vec<_> =
            inp_rays(h, &em.lengths, em.lambda, total * (1.0 + 1e-6)).into_iter().map(|p| canonical(&p.path)).collect();
        rays.sort();
        let brute: Vec<_> = inp_brute_force(h, &em.lengths, 2.0 * total + 1e-6)
            .into_iter()
            .filter(|p| is_nielsen_path(h, p, 1))
            .collect();
        assert_eq!(rays, brute, "power {q}");
        checked += 1;
        for p in &rays {
            assert!(is_nielsen_path(h, p, 1));
        }
    }
    assert!(checked >= 3);
}

#[test]
fn no_nielsen_paths_means_brute_force_finds_none() {
    let m = two_vertex();
    assert_eq!(classify(&m, 24, 64, TOL).verdict, Verdict::NoPeriodicNielsenPath);
    for q in 1..=2 {
        let sub = subdivide_fixed(&m.power(q).unwrap()).unwrap();
        let em = metric_unchecked(&sub.map, TOL).unwrap();
        let total: f64 = em.lengths.iter().sum();
        assert!(inp_brute_force(&sub.map, &em.lengths, 2.0 * total + 1e-6).is_empty(), "power {q}");
    }
}

#[test]
fn folding_a_nielsen_path_keeps_lambda() {
    let sub = subdivide_fixed(&phi().power(4).unwrap()).unwrap();
    let h = &sub.map;
    let em = metric_unchecked(h, TOL).unwrap();
    let rays = inp_rays(h, &em.lengths, em.lambda, 1.0 + 1e-6);
    assert_eq!(rays.len(), 2);
    for rho in rays {
        let (folded, image) = fold_inp(h, &rho).unwrap();
        assert!(folded.is_train_track().train_track);
        let l = pf_eigen(&transition_matrix(&folded), TOL).unwrap().lambda;
        assert!((l - em.lambda).abs() < 1e-8);
        assert!(is_nielsen_path(&folded, &image, 1));
    }
}
