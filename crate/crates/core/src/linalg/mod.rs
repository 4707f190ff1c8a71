//! Dense real/complex linear algebra: Hermitian eigendecomposition, singular
//! values, matrix norms and the Fubini–Study angle between complex lines.

mod eigen;
mod matrix;
mod scalar;
mod svd;

use num_complex::Complex64;
use thiserror::Error;

pub use eigen::{
    hermitian_eig, hermitian_eig_with, hermitian_eigenvalues, HermitianSpectrum, JacobiOptions,
    HERMITIAN_TOL,
};
pub use matrix::{ComplexMatrix, Matrix, RealMatrix};
pub use scalar::{dot, norm, norm_sq, normalize, Scalar};
pub use svd::{svd, svd_values, SvdResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: ||A - A*||_F = {defect:e} exceeds {allowed:e}")]
    NotHermitian { defect: f64, allowed: f64 },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("rows have different lengths")]
    RaggedRows,
    #[error("matrix has no entries")]
    EmptyMatrix,
    #[error("matrix or vector contains NaN or infinite entries")]
    NonFinite,
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Frobenius and spectral (largest singular value) norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixNorms {
    pub frobenius: f64,
    pub spectral: f64,
}

pub fn matrix_norms<T: Scalar>(a: &Matrix<T>) -> Result<MatrixNorms, LinalgError> {
    let spectral = svd_values(a)?.largest();
    Ok(MatrixNorms {
        frobenius: a.frobenius_norm(),
        spectral,
    })
}

pub fn spectral_norm<T: Scalar>(a: &Matrix<T>) -> Result<f64, LinalgError> {
    Ok(svd_values(a)?.largest())
}

/// Angle between the complex lines through `x` and `y`:
/// `arccos(|<x,y>| / (||x|| ||y||))`, in `[0, pi/2]`.
///
/// Evaluated as `atan2(||x_perp||, |<x,y>|)` on normalized inputs so that small
/// angles keep full relative accuracy.
pub fn fubini_study_distance(x: &[Complex64], y: &[Complex64]) -> Result<f64, LinalgError> {
    if x.len() != y.len() {
        return Err(LinalgError::LengthMismatch(x.len(), y.len()));
    }
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(LinalgError::ZeroVector);
    }
    Ok(unit_angle(x, y, 1.0 / nx, 1.0 / ny))
}

/// Same as [`fubini_study_distance`] for inputs already known to be nonzero;
/// `sx`, `sy` are the reciprocal norms.
pub(crate) fn unit_angle(x: &[Complex64], y: &[Complex64], sx: f64, sy: f64) -> f64 {
    let inner = dot(y, x) * (sx * sy);
    let mut perp = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        perp += (a * sx - inner * (b * sy)).norm_sqr();
    }
    perp.sqrt()
        .atan2(inner.norm())
        .clamp(0.0, std::f64::consts::FRAC_PI_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn fubini_study_examples() {
        let e1 = [c(1.0), c(0.0)];
        let e2 = [c(0.0), c(1.0)];
        assert_eq!(fubini_study_distance(&e1, &e2).unwrap(), FRAC_PI_2);

        let x = [Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5)];
        let ix: Vec<Complex64> = x.iter().map(|v| v * Complex64::i()).collect();
        assert!(fubini_study_distance(&x, &ix).unwrap() < 1e-15);

        let d = [c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)];
        assert!((fubini_study_distance(&d, &e1).unwrap() - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn fubini_study_zero_vector() {
        let z = [c(0.0), c(0.0)];
        let e1 = [c(1.0), c(0.0)];
        assert_eq!(fubini_study_distance(&z, &e1), Err(LinalgError::ZeroVector));
    }

    #[test]
    fn norms_examples() {
        let a = Matrix::from_diag(&[3.0, 4.0]);
        let n = matrix_norms(&a).unwrap();
        assert_eq!((n.frobenius, n.spectral), (5.0, 4.0));
        let i4 = Matrix::<f64>::identity(4);
        let n = matrix_norms(&i4).unwrap();
        assert_eq!((n.frobenius, n.spectral), (2.0, 1.0));
    }
}
