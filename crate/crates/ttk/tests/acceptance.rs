//! One line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use ttk::folds::{fold_factorization, invert_automorphism, is_inverse_pair, verify_factorization};
use ttk::graphs::length_with;
use ttk::maps::GraphSelfMap;
use ttk::nielsen::{classify, nielsen_elimination, EliminationOutcome, Verdict, NONGEOMETRIC_STATEMENT};
use ttk::spectral::{
    charpoly, eigen_metric, largest_real_root, pf_eigen, preimage_count, transition_matrix, TransitionMatrix,
};
use ttk::wedge::{
    brute_force_walks, build_wedge, derive_parageometric, i1_preimage_count, leaf_graph, nonfree_subgraph, verify_gap,
    InverseEvidence, COROLLARY_STATEMENT,
};
use ttk::words::{default_seeds, growth_rate, rose_automorphism};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lambda(m: &GraphSelfMap) -> Result<f64, String> {
    pf_eigen(&transition_matrix(m), TOL).map(|p| p.lambda).map_err(|e| e.to_string())
}

fn criterion_1() -> Outcome {
    let (lp, li) = (lambda(&phi())?, lambda(&phi_inv())?);
    let rp = largest_real_root(&charpoly(&transition_matrix(&phi())), 1e-13);
    let ri = largest_real_root(&charpoly(&transition_matrix(&phi_inv())), 1e-13);
    ensure((rp - 1.465571232).abs() < 1e-8 && (ri - 1.324717957).abs() < 1e-8, || format!("charpoly roots {rp} {ri}"))?;
    ensure((lp - 1.465571232).abs() < 1e-8, || format!("λ(φ) = {lp}"))?;
    ensure((li - 1.324717957).abs() < 1e-8, || format!("λ(φ⁻¹) = {li}"))?;
    ensure(lp > 1.4 && li < 1.4, || "bounds > 1.4 / < 1.4 violated".into())?;
    Ok(format!("λ(φ) = {lp:.9} > 1.4, λ(φ⁻¹) = {li:.9} < 1.4"))
}

fn criterion_2() -> Outcome {
    let m = two_vertex();
    let l = lambda(&m)?;
    ensure((l - 3.199158087).abs() < 1e-8, || format!("λ = {l}"))?;
    let (rose, _) = rose_automorphism(&m).map_err(|e| e.to_string())?;
    let inv = invert_automorphism(&rose).map_err(|e| e.to_string())?;
    ensure(is_inverse_pair(&rose, &inv).map_err(|e| e.to_string())?.is_some(), || "inversion failed".into())?;
    let g = growth_rate(&inv, &default_seeds(3), 20, 1_000_000).map_err(|e| e.to_string())?;
    ensure((g.estimate - 3.1992).abs() < 1e-3, || format!("growth of inverse {}", g.estimate))?;
    Ok(format!("λ = {l:.9}, growth of inverse ≈ {:.5}", g.estimate))
}

fn criterion_3() -> Outcome {
    let m = two_vertex();
    let e = nielsen_elimination(&m, 64, TOL).map_err(|e| e.to_string())?;
    ensure(e.outcome == EliminationOutcome::Empty && e.steps <= 64, || {
        format!("{:?} after {} steps, sizes {:?}", e.outcome, e.steps, e.sizes)
    })?;
    Ok(format!("Empty after {} steps ({} fold steps; {}-fold factorization)", e.steps, e.fold_steps, e.folds))
}

fn criterion_4() -> Outcome {
    let c = classify(&two_vertex(), 24, 64, TOL);
    ensure(c.verdict == Verdict::NoPeriodicNielsenPath, || format!("{:?}", c.verdict))?;
    ensure(c.statements.iter().any(|s| s == NONGEOMETRIC_STATEMENT), || format!("{:?}", c.statements))?;
    Ok(format!("NoPeriodicNielsenPath; \"{NONGEOMETRIC_STATEMENT}\""))
}

fn criterion_5() -> Outcome {
    let inv = invert_automorphism(&phi()).map_err(|e| e.to_string())?;
    let w = is_inverse_pair(&phi(), &phi_inv()).map_err(|e| e.to_string())?;
    let w2 = is_inverse_pair(&phi(), &inv).map_err(|e| e.to_string())?;
    ensure(w.is_some() && w2.is_some(), || format!("pair {w:?}, computed {w2:?}"))?;
    let g = inv.graph();
    let images: Vec<String> =
        (0..3).map(|e| format!("{}→{}", g.edge_name(e), g.format_path(inv.edge_image(e)))).collect();
    Ok(format!("computed inverse {}; conjugator {}", images.join(", "), {
        let w = w.unwrap().format(g);
        if w.is_empty() {
            "ε".to_string()
        } else {
            format!("`{w}`")
        }
    }))
}

fn criterion_6() -> Outcome {
    let d = derive_parageometric(&phi(), 24, 64, TOL).map_err(|e| {
        format!("no Nielsen-unique parageometric representative within the caps (max power 24, max back 64): {e}")
    })?;
    let c = &d.classification;
    ensure(c.verdict == Verdict::ParageometricCandidate, || {
        format!("power {}: {:?}, counts per power {:?}, notes {:?}", d.power, c.verdict, c.counts_per_power, c.notes)
    })?;
    let rho = c.inp.as_ref().ok_or("classification carries no ρ")?;
    let w = build_wedge(&d.map, rho, TOL).map_err(|e| e.to_string())?;
    let has_free = !w.free_edges.is_empty();
    let has_three = w.valence.iter().any(|&v| v >= 3);
    ensure(has_free && has_three, || format!("dihedral valences {:?}", w.valence))?;
    let ev = InverseEvidence::Representative(phi_inv());
    let (rep, _, _) = verify_gap(&d.map, d.power, c, Some(&ev), TOL).map_err(|e| e.to_string())?;
    ensure(rep.verdict && rep.margin >= 1e-3, || serde_json::to_string(&rep).unwrap_or_default())?;
    ensure(rep.statements.iter().any(|s| s == COROLLARY_STATEMENT), || format!("{:?}", rep.statements))?;
    Ok(format!(
        "φ^{}: λ(φ⁻¹) = {} ≤ λ′ = {} < λ(φ) = {}, margin {}; valences {:?}",
        rep.power, rep.lambda_phi_inverse, rep.lambda_prime, rep.lambda_phi, rep.margin, w.valence
    ))
}

fn criterion_7() -> Outcome {
    let mut checked = 0;
    for (name, m) in [("phi", phi()), ("two_vertex", two_vertex()), ("phi4", phi4())] {
        let mt = transition_matrix(&m);
        for e in 0..mt.dim() {
            for n in 0..=8 {
                let a = preimage_count(&mt, e, n).map_err(|e| e.to_string())?;
                let b = brute_force_walks(&mt, e, n);
                ensure(a == b, || format!("{name}: edge {e}, n {n}: {a} vs {b}"))?;
                checked += 1;
            }
        }
    }
    let m = phi4();
    let c = classify(&m, 4, 64, TOL);
    let rho = c.inp.as_ref().ok_or("no ρ on the derived representative")?;
    let w = build_wedge(&m, rho, TOL).map_err(|e| e.to_string())?;
    let sub = nonfree_subgraph(&w, TOL).map_err(|e| e.to_string())?;
    for (i, e) in sub.edges.iter().enumerate() {
        for n in 0..=8 {
            let a = i1_preimage_count(&sub, e, n).map_err(|e| e.to_string())?;
            let b = brute_force_walks(&sub.matrix, i, n);
            ensure(a == b, || format!("G₁ edge {e}, n {n}: {a} vs {b}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} exact counts agree (TG and TG₁, n ≤ 8)"))
}

fn run_prop<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

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

fn criterion_8() -> Outcome {
    let maps = [phi(), two_vertex(), phi4()];
    run_prop(1000, (0usize..3, 0usize..64, prop::collection::vec(any::<u8>(), 0..24)), |(k, s, c)| {
        let g = maps[k].graph();
        let t = g.tighten(&walk(g, s, &c)).unwrap();
        prop_assert_eq!(g.tighten(&t).unwrap(), t);
        Ok(())
    })
    .map_err(|e| format!("tighten: {e}"))?;

    for (name, m) in [("phi", phi()), ("two_vertex", two_vertex())] {
        let seq = fold_factorization(&m).map_err(|e| e.to_string())?;
        ensure(verify_factorization(&seq, &m), || format!("fold recomposition fails on {name}"))?;
    }

    for m in [phi(), phi_inv(), two_vertex(), phi4()] {
        let em = eigen_metric(&m, TOL).map_err(|e| e.to_string())?;
        for e in 0..m.graph().edge_count() {
            let r = (length_with(&em.lengths, m.edge_image(e)) - em.lambda * em.lengths[e]).abs();
            ensure(r <= 1e-8 * em.total(), || format!("stretch residual {r} on edge {e}"))?;
        }
    }

    run_prop(64, primitive_matrix(), |m| {
        let l = pf_eigen(&m, TOL).unwrap().lambda;
        let lt = pf_eigen(&m.transpose(), TOL).unwrap().lambda;
        prop_assert!((l - lt).abs() <= 1e-8 * l.max(1.0));
        for n in 1..=4u32 {
            let ln = pf_eigen(&m.pow(n).unwrap(), TOL).unwrap().lambda;
            let want = l.powi(n as i32);
            prop_assert!((ln - want).abs() <= n as f64 * 1e-8 * want.max(1.0));
        }
        Ok(())
    })
    .map_err(|e| format!("PF: {e}"))?;

    let m = phi4();
    let c = classify(&m, 4, 64, TOL);
    let w = build_wedge(&m, c.inp.as_ref().ok_or("no ρ")?, TOL).map_err(|e| e.to_string())?;
    let sub = nonfree_subgraph(&w, TOL).map_err(|e| e.to_string())?;
    let mut leaves = 0;
    for &e in &sub.edge_ids {
        for frac in [0.1, 0.381_966, 0.5, 0.77] {
            for depth in 0..=6 {
                let lg = leaf_graph(&w, e, frac * w.lengths[e], depth).map_err(|e| e.to_string())?;
                ensure(lg.acyclic && lg.valences_agree(), || format!("leaf at edge {e}, {frac}, depth {depth}"))?;
                leaves += 1;
            }
        }
    }
    Ok(format!("tighten ×1000, fold recomposition, stretch, PF transpose/powers ×64, {leaves} leaf graphs"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("PF eigenvalues of Φ and Φ⁻¹", criterion_1),
        ("two-vertex λ and inverse growth", criterion_2),
        ("two-vertex Nielsen elimination", criterion_3),
        ("two-vertex classification", criterion_4),
        ("inversion of Φ", criterion_5),
        ("Φ parageometric gap", criterion_6),
        ("preimage counts vs walks", criterion_7),
        ("property suites", criterion_8),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let ms = t.elapsed().as_millis();
        match r {
            Ok(detail) => println!("criterion {}: PASS  {name} — {detail} [{ms} ms]", i + 1),
            Err(diag) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} — {diag} [{ms} ms]", i + 1);
            }
        }
    }
    println!("acceptance: {}/8 passed in {:.1} s", 8 - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
