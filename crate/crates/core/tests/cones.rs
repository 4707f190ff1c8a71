use proptest::prelude::*;
use wacc_core::cones::{cone_geometry, smat, svec, Cone, Subspace};
use wacc_core::linalg::{dot, norm, RealMatrix};
use wacc_core::sampling::{standard_normal, RngStream};

fn variants() -> Vec<Cone> {
    let tilted = Subspace::new(
        5,
        &[
            vec![1.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, -2.0, 1.0],
        ],
    )
    .unwrap();
    vec![
        Cone::FullSpace(4),
        Cone::Subspace(tilted),
        Cone::Orthant(6),
        Cone::SecondOrder(5),
        Cone::Psd(3),
        Cone::Orthant(4).polar(),
        Cone::SecondOrder(4).polar(),
        Cone::Psd(2).polar(),
    ]
}

fn gaussian(stream: RngStream, m: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..m).map(|_| standard_normal(&mut rng)).collect()
}

#[test]
fn moreau_decomposition() {
    for (k, cone) in variants().into_iter().enumerate() {
        let polar = cone.polar();
        for i in 0..1000u64 {
            let v = gaussian(RngStream::new(k as u64, i), cone.ambient_dim());
            let p = cone.project(&v).unwrap();
            let q = polar.project(&v).unwrap();
            let sum_err: f64 = v
                .iter()
                .zip(p.iter().zip(&q))
                .map(|(a, (b, c))| (a - b - c).abs())
                .fold(0.0, f64::max);
            assert!(sum_err < 1e-9, "{cone}: v != P_C v + P_C° v ({sum_err})");
            assert!(
                dot(&p, &q).abs() < 1e-9,
                "{cone}: <P_C v, P_C° v> = {}",
                dot(&p, &q)
            );
        }
    }
}

#[test]
fn double_polar_projects_like_the_cone() {
    for (k, cone) in variants().into_iter().enumerate() {
        let bipolar = Cone::PolarOf(Box::new(Cone::PolarOf(Box::new(cone.clone()))));
        for i in 0..100u64 {
            let v = gaussian(RngStream::new(100 + k as u64, i), cone.ambient_dim());
            let a = cone.project(&v).unwrap();
            let b = bipolar.project(&v).unwrap();
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            assert!(norm(&d) <= 1e-10, "{cone}");
        }
    }
}

#[test]
fn psd_projection_beats_a_grid_of_psd_matrices() {
    let v = svec(&RealMatrix::from_diag(&[1.0, -3.0]));
    let p = Cone::Psd(2).project(&v).unwrap();
    let expected = svec(&RealMatrix::from_diag(&[1.0, 0.0]));
    assert!(p.iter().zip(&expected).all(|(a, b)| (a - b).abs() < 1e-12));
    let best = norm(&p.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
    // PSD 2x2 matrices [[a, b], [b, c]] with a, c >= 0 and b^2 <= ac
    let steps = 100;
    for i in 0..steps {
        for j in 0..steps {
            let a = 2.0 * i as f64 / (steps - 1) as f64;
            let c = 2.0 * j as f64 / (steps - 1) as f64;
            for b in [-(a * c).sqrt(), 0.0, (a * c).sqrt()] {
                let m = RealMatrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
                let w = svec(&m);
                let d = norm(&w.iter().zip(&v).map(|(x, y)| x - y).collect::<Vec<_>>());
                assert!(best <= d + 1e-12);
            }
        }
    }
    assert_eq!(smat(&p, 2), RealMatrix::from_diag(&[1.0, 0.0]));
}

#[test]
fn geometry_matches_closed_forms() {
    let cones = [
        Cone::FullSpace(7),
        Cone::Orthant(10),
        Cone::Psd(3),
        Cone::SecondOrder(6),
        Cone::Subspace(Subspace::coordinate(3, 8)),
        Cone::Orthant(5).polar(),
    ];
    for (k, cone) in cones.iter().enumerate() {
        let g = cone_geometry(cone, 50_000, RngStream::new(77, k as u64)).unwrap();
        if let Some(delta) = cone.closed_form_dimension() {
            assert!(
                (g.statistical_dimension - delta).abs() <= 3.0 * g.dimension_se + 1e-12,
                "{cone}: {} vs {delta}",
                g.statistical_dimension
            );
        }
        if let Some(w) = cone.closed_form_width() {
            assert!(
                (g.gaussian_width - w).abs() <= 3.0 * g.width_se + 1e-12,
                "{cone}: {} vs {w}",
                g.gaussian_width
            );
        }
    }
    let g = cone_geometry(&Cone::FullSpace(1), 100_000, RngStream::new(78, 0)).unwrap();
    assert!((g.gaussian_width - (2.0 / std::f64::consts::PI).sqrt()).abs() <= 3.0 * g.width_se);
}

fn cone_strategy() -> impl Strategy<Value = Cone> {
    prop_oneof![
        (1usize..6).prop_map(Cone::FullSpace),
        (1usize..6).prop_map(Cone::Orthant),
        (2usize..6).prop_map(Cone::SecondOrder),
        (1usize..4).prop_map(Cone::Psd),
        (0usize..4, 4usize..6).prop_map(|(k, m)| Cone::Subspace(Subspace::coordinate(k, m))),
        (1usize..6).prop_map(|m| Cone::Orthant(m).polar()),
        (2usize..6).prop_map(|m| Cone::SecondOrder(m).polar()),
    ]
}

fn vectors(cone: &Cone) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let m = cone.ambient_dim();
    (
        prop::collection::vec(-5.0f64..5.0, m),
        prop::collection::vec(-5.0f64..5.0, m),
    )
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        (cone, (u, v)) in cone_strategy().prop_flat_map(|c| { let s = vectors(&c); (Just(c), s) })
    ) {
        let pu = cone.project(&u).unwrap();
        let pv = cone.project(&v).unwrap();
        let ppu = cone.project(&pu).unwrap();
        prop_assert!(pu.iter().zip(&ppu).all(|(a, b)| (a - b).abs() <= 1e-10 * (1.0 + a.abs())));
        let dp: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| a - b).collect();
        let d: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&dp) <= norm(&d) + 1e-10);
        // P_C(u) lies in C: it is its own projection and is polar-orthogonal
        let q = cone.polar().project(&u).unwrap();
        prop_assert!(dot(&pu, &q).abs() <= 1e-9);
    }

    #[test]
    fn spec_strings_round_trip(cone in cone_strategy()) {
        let parsed: Cone = cone.to_string().parse().unwrap();
        prop_assert_eq!(parsed, cone);
    }
}
