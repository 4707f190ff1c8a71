use wacc_core::cones::Cone;
use wacc_core::linalg::{norm, svd_values, RealMatrix};
use wacc_core::renegar::{
    keybound, keybound_integrand, renegar_condition, renegar_weak_experiment,
    restricted_singular_value, AsymptoticRegime, BiconicProblem, ConeFamily, KeyboundWidths,
    SolverBudget, SresQuality, Verdict,
};
use wacc_core::sampling::{gaussian_matrix, standard_normal, RngStream};

fn budget(seed: u64) -> SolverBudget {
    SolverBudget::default().with_stream(RngStream::new(seed, 0))
}

/// Smallest `||P_D(A x)||` over `samples` random points of `C ∩ S`.
fn brute_force(a: &RealMatrix, c: &Cone, d: &Cone, samples: usize, stream: RngStream) -> f64 {
    let mut rng = stream.rng();
    let m = c.ambient_dim();
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let g: Vec<f64> = (0..m).map(|_| standard_normal(&mut rng)).collect();
        let mut x = c.project(&g).unwrap();
        let r = norm(&x);
        if r == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= r);
        best = best.min(norm(&d.project(&a.mul_vec(&x)).unwrap()));
    }
    best
}

fn small_instances() -> Vec<(RealMatrix, Cone, Cone)> {
    let pairs = [
        (Cone::Orthant(2), Cone::FullSpace(2)),
        (Cone::Orthant(3), Cone::FullSpace(4)),
        (Cone::Orthant(3), Cone::Orthant(3)),
        (Cone::SecondOrder(3), Cone::Orthant(4)),
        (Cone::Orthant(4), Cone::SecondOrder(3)),
        (Cone::Psd(2), Cone::Orthant(3)),
    ];
    let mut out = Vec::new();
    for (i, (c, d)) in pairs.into_iter().enumerate() {
        for j in 0..5u64 {
            let a = gaussian_matrix(
                &mut RngStream::new(40 + i as u64, j).rng(),
                d.ambient_dim(),
                c.ambient_dim(),
            )
            .unwrap();
            out.push((a, c.clone(), d.clone()));
        }
    }
    out
}

#[test]
fn orthant_identity_matches_brute_force() {
    let a = RealMatrix::identity(2);
    let r =
        restricted_singular_value(&a, &Cone::Orthant(2), &Cone::FullSpace(2), &budget(1)).unwrap();
    let b = brute_force(
        &a,
        &Cone::Orthant(2),
        &Cone::FullSpace(2),
        10_000,
        RngStream::new(2, 0),
    );
    assert!((r.value - 1.0).abs() < 1e-9);
    assert!((b - 1.0).abs() < 1e-9);
}

#[test]
fn solver_dominates_random_search() {
    for (k, (a, c, d)) in small_instances().into_iter().enumerate() {
        let r = restricted_singular_value(&a, &c, &d, &budget(k as u64)).unwrap();
        let b = brute_force(&a, &c, &d, 100_000, RngStream::new(1000 + k as u64, 0));
        assert!(
            r.value <= b + 1e-12,
            "{c} -> {d}: solver {} vs brute force {b}",
            r.value
        );
        // random search in at most 4 dimensions lands close to the minimum
        assert!(
            b - r.value <= 0.05 * b.max(1.0),
            "{c} -> {d}: solver {} vs brute force {b}",
            r.value
        );
        assert_ne!(r.quality, SresQuality::Stalled);
    }
}

#[test]
fn exchange_symmetry_scale_invariance_and_lower_bound() {
    for (k, (a, c, d)) in small_instances().into_iter().enumerate() {
        let p = BiconicProblem::new(a.clone(), c.clone(), d.clone()).unwrap();
        let r = renegar_condition(&p, &budget(k as u64)).unwrap();
        let e = renegar_condition(&p.dual(), &budget(500 + k as u64)).unwrap();
        let s = renegar_condition(
            &BiconicProblem::new(a.scaled(3.7e-3), c, d).unwrap(),
            &budget(k as u64),
        )
        .unwrap();
        assert!(r.value >= 1.0 - 1e-12);
        if r.value.is_finite() {
            assert!(
                (r.value - e.value).abs() <= 1e-6 * r.value,
                "{} vs {}",
                r.value,
                e.value
            );
            assert!(
                (r.value - s.value).abs() <= 1e-8 * r.value,
                "{} vs {}",
                r.value,
                s.value
            );
        } else {
            assert!(e.value.is_infinite() && s.value.is_infinite());
        }
    }
}

#[test]
fn full_cones_recover_the_matrix_condition_number() {
    let g = gaussian_matrix(&mut RngStream::new(3, 0).rng(), 20, 50).unwrap();
    let sv = svd_values(&g).unwrap();
    let kappa = sv.largest() / sv.smallest();
    let p = BiconicProblem::new(g.clone(), Cone::FullSpace(50), Cone::FullSpace(20)).unwrap();
    let r = renegar_condition(&p, &budget(0)).unwrap();
    assert!((r.value - kappa).abs() <= 1e-6 * kappa);
    let s = renegar_condition(
        &BiconicProblem::new(g.scaled(250.0), p.c, p.d).unwrap(),
        &budget(0),
    )
    .unwrap();
    assert!((s.value - r.value).abs() <= 1e-12 * r.value);
}

#[test]
fn gaussian_full_cones_have_a_strict_alternative() {
    for i in 0..1000u64 {
        let g = gaussian_matrix(&mut RngStream::new(4, i).rng(), 8, 5).unwrap();
        let p = BiconicProblem::new(g, Cone::FullSpace(5), Cone::FullSpace(8)).unwrap();
        let r = renegar_condition(&p, &budget(i)).unwrap();
        assert_eq!(r.verdict.tag, Verdict::Dual);
        assert!(r.verdict.sres_primal > r.verdict.tolerance && r.verdict.sres_dual == 0.0);
    }
}

#[test]
fn keybound_integral_matches_trapezoid() {
    let w = KeyboundWidths {
        w_c: 0.0,
        w_d: 10.0,
        w_rm: 8.0,
        w_rn: 12.0,
    };
    let k = keybound(&w).unwrap();
    let (lo, hi) = (k.b / k.a, (k.a + k.b) / (2.0 * k.a));
    let f = keybound_integrand(k.a, k.b);
    let n = 1_000_000;
    let h = (hi - lo) / n as f64;
    let trap = h * ((1..n).map(|i| f(lo + i as f64 * h)).sum::<f64>() + 0.5 * (f(lo) + f(hi)));
    assert!((k.integral - trap).abs() < 1e-8, "{} vs {trap}", k.integral);
}

#[test]
fn keybound_tends_to_the_width_ratio() {
    let mut last = f64::INFINITY;
    for s in [1.0, 4.0, 16.0, 64.0, 256.0, 1024.0] {
        let w = KeyboundWidths {
            w_c: 0.0,
            w_d: 10.0 * s,
            w_rm: 8.0 * s,
            w_rn: 12.0 * s,
        };
        let k = keybound(&w).unwrap();
        let excess = k.rhs - 2.0;
        assert!(excess > 0.0 && excess < last);
        last = excess;
    }
    assert!(last < 1e-3, "{last}");
}

#[test]
fn full_cone_means_approach_the_limit() {
    let regime = AsymptoticRegime {
        c_family: ConeFamily::Full,
        d_family: ConeFamily::Full,
        gamma: 0.5,
        base_n: 50,
    };
    let gaps: Vec<f64> = (0..4)
        .map(|k| {
            let e = renegar_weak_experiment(
                &regime,
                k,
                0.01,
                200,
                &budget(0),
                RngStream::new(60, k as u64),
            )
            .unwrap();
            assert_eq!(e.stalled, 0);
            (e.weak.conditional_mean - e.limit.unwrap()).abs()
        })
        .collect();
    let shrinking = gaps.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(shrinking >= 2, "gaps {gaps:?}");
}

#[test]
fn weak_experiment_is_reproducible() {
    let regime = AsymptoticRegime {
        c_family: ConeFamily::Orthant,
        d_family: ConeFamily::Full,
        gamma: 0.5,
        base_n: 24,
    };
    let run = || {
        renegar_weak_experiment(&regime, 0, 0.05, 100, &budget(9), RngStream::new(61, 0)).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!((a.m, a.n), (6, 24));
    assert!(a
        .trials
        .iter()
        .all(|t| t.verdict == Verdict::Dual && t.value >= 1.0));
}
