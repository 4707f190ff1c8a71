use num_complex::Complex64;
use proptest::prelude::*;
use wacc_core::linalg::{
    dot, fubini_study_distance, hermitian_eig, norm, spectral_norm, svd, svd_values, ComplexMatrix,
    RealMatrix, HERMITIAN_TOL,
};
use wacc_core::sampling::{gaussian_matrix, gue_matrix, RngStream};

#[test]
fn eigendecomposition_residuals_and_orthonormality() {
    for trial in 0..100u64 {
        let n = 2 + (trial as usize % 31);
        let h = gue_matrix(&mut RngStream::new(11, trial).rng(), n).unwrap();
        let s = hermitian_eig(&h, HERMITIAN_TOL).unwrap();
        let scale = spectral_norm(&h).unwrap();
        for (lambda, u) in s.eigenvalues.iter().zip(&s.eigenvectors) {
            let hu = h.mul_vec(u);
            let r: Vec<Complex64> = hu.iter().zip(u).map(|(a, b)| a - b * lambda).collect();
            assert!(norm(&r) <= 1e-9 * scale, "n={n} residual {}", norm(&r));
        }
        for i in 0..n {
            for j in 0..n {
                let g = dot(&s.eigenvectors[i], &s.eigenvectors[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g - target).norm() < 1e-10, "gram ({i},{j}) = {g}");
            }
        }
        for w in s.eigenvalues.windows(2) {
            assert!(w[0].abs() >= w[1].abs());
        }
    }
}

#[test]
fn singular_values_of_hermitian_are_absolute_eigenvalues() {
    for trial in 0..20u64 {
        let h = gue_matrix(&mut RngStream::new(12, trial).rng(), 9).unwrap();
        let mut abs: Vec<f64> = hermitian_eig(&h, HERMITIAN_TOL)
            .unwrap()
            .eigenvalues
            .iter()
            .map(|v| v.abs())
            .collect();
        abs.sort_by(|a, b| b.total_cmp(a));
        let sv = svd_values(&h).unwrap().singular_values;
        for (a, b) in abs.iter().zip(&sv) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn spectral_norm_is_top_singular_value() {
    let g = gaussian_matrix(&mut RngStream::new(13, 0).rng(), 5, 7).unwrap();
    let s = svd(&g, true).unwrap();
    assert!((spectral_norm(&g).unwrap() - s.largest()).abs() < 1e-10);
    let back = s.reconstruct().unwrap();
    assert!(back.sub(&g).unwrap().frobenius_norm() < 1e-10 * g.frobenius_norm());
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)),
        len,
    )
}

proptest! {
    #[test]
    fn fubini_study_is_projective(
        x in complex_vec(4),
        y in complex_vec(4),
        r in 0.1f64..10.0,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        prop_assume!(norm(&x) > 1e-3 && norm(&y) > 1e-3);
        let c = Complex64::from_polar(r, theta);
        let cx: Vec<Complex64> = x.iter().map(|v| v * c).collect();
        let d = fubini_study_distance(&x, &y).unwrap();
        prop_assert!((d - fubini_study_distance(&cx, &y).unwrap()).abs() < 1e-12);
        prop_assert!((d - fubini_study_distance(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&d));
    }

    #[test]
    fn svd_reconstructs_real_matrices(
        rows in 1usize..7,
        cols in 1usize..7,
        seed in any::<u64>(),
    ) {
        let a = gaussian_matrix(&mut RngStream::new(seed, 0).rng(), rows, cols).unwrap();
        let s = svd(&a, true).unwrap();
        let back: RealMatrix = s.reconstruct().unwrap();
        prop_assert!(back.sub(&a).unwrap().frobenius_norm() <= 1e-10 * a.frobenius_norm().max(1.0));
        prop_assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eigen_reconstruction(n in 1usize..9, seed in any::<u64>()) {
        let h: ComplexMatrix = gue_matrix(&mut RngStream::new(seed, 1).rng(), n).unwrap();
        let s = hermitian_eig(&h, HERMITIAN_TOL).unwrap();
        prop_assert!(s.reconstruct().sub(&h).unwrap().frobenius_norm() <= 1e-9 * h.frobenius_norm().max(1.0));
    }
}
