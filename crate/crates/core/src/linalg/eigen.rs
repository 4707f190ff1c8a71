//! Cyclic Jacobi eigensolver for Hermitian (and real symmetric) matrices.
//!
//! Each rotation annihilates one off-diagonal pair `(p, q)`. For complex
//! entries the rotation carries the phase of `a_pq`, so the same code path
//! handles real symmetric input with a trivial phase.

use num_complex::Complex64;

use super::matrix::Matrix;
use super::scalar::Scalar;
use super::LinalgError;

/// Sweep budget and stopping rule for the Jacobi iteration.
#[derive(Debug, Clone, Copy)]
pub struct JacobiOptions {
    pub max_sweeps: usize,
    /// Stop once the off-diagonal Frobenius norm is below `rel_tol * ||A||_F`.
    pub rel_tol: f64,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            rel_tol: 1e-12,
        }
    }
}

/// Default relative tolerance for the Hermitian symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues ordered by decreasing absolute value, with orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianSpectrum<T = Complex64> {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` belongs to `eigenvalues[i]`.
    pub eigenvectors: Vec<Vec<T>>,
}

impl<T: Scalar> HermitianSpectrum<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `sum_i lambda_i u_i u_i^*`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        for (lambda, u) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for i in 0..n {
                let ui = u[i].scale(*lambda);
                for j in 0..n {
                    out[(i, j)] += ui * u[j].conj();
                }
            }
        }
        out
    }
}

fn check_hermitian<T: Scalar>(a: &Matrix<T>, tol: f64) -> Result<(), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let defect = a.hermitian_defect();
    let scale = a.frobenius_norm();
    if defect > tol * scale {
        return Err(LinalgError::NotHermitian {
            defect,
            allowed: tol * scale,
        });
    }
    Ok(())
}

/// Orders eigenpairs by `|lambda|` descending, ties by signed value descending.
fn abs_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| {
        values[j]
            .abs()
            .total_cmp(&values[i].abs())
            .then(values[j].total_cmp(&values[i]))
    });
    idx
}

/// Full Hermitian eigendecomposition.
pub fn hermitian_eig<T: Scalar>(
    a: &Matrix<T>,
    tol: f64,
) -> Result<HermitianSpectrum<T>, LinalgError> {
    hermitian_eig_with(a, tol, JacobiOptions::default())
}

pub fn hermitian_eig_with<T: Scalar>(
    a: &Matrix<T>,
    tol: f64,
    opts: JacobiOptions,
) -> Result<HermitianSpectrum<T>, LinalgError> {
    check_hermitian(a, tol)?;
    let n = a.rows();
    let mut work = a.clone().into_data();
    let mut vecs = Matrix::<T>::identity(n).into_data();
    jacobi_sweeps(&mut work, Some(&mut vecs), n, opts)?;
    let values: Vec<f64> = (0..n).map(|i| work[i * n + i].re()).collect();
    let order = abs_order(&values);
    Ok(HermitianSpectrum {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        eigenvectors: order
            .iter()
            .map(|&j| (0..n).map(|i| vecs[i * n + j]).collect())
            .collect(),
    })
}

/// Eigenvalues only, in the same `|lambda|` order as [`hermitian_eig`].
pub fn hermitian_eigenvalues<T: Scalar>(a: &Matrix<T>, tol: f64) -> Result<Vec<f64>, LinalgError> {
    check_hermitian(a, tol)?;
    let n = a.rows();
    let mut work = a.clone().into_data();
    jacobi_sweeps::<T>(&mut work, None, n, JacobiOptions::default())?;
    let values: Vec<f64> = (0..n).map(|i| work[i * n + i].re()).collect();
    Ok(abs_order(&values).into_iter().map(|i| values[i]).collect())
}

/// Parameters of the unitary rotation zeroing a Hermitian 2x2 block
/// `[[app, apq], [conj(apq), aqq]]`.
pub(crate) struct Rotation<T> {
    pub c: f64,
    pub s: f64,
    /// Unit phase `apq / |apq|`.
    pub phase: T,
    /// Tangent `t`; diagonal updates are `app - t r` and `aqq + t r`.
    pub t: f64,
    pub r: f64,
}

#[inline]
pub(crate) fn rotation<T: Scalar>(app: f64, aqq: f64, apq: T) -> Option<Rotation<T>> {
    let r = apq.abs();
    if r == 0.0 || !r.is_finite() {
        return None;
    }
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    Some(Rotation {
        c,
        s: t * c,
        phase: apq.scale(1.0 / r),
        t,
        r,
    })
}

fn off_norm_sq<T: Scalar>(a: &[T], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[i * n + j].abs_sq();
            }
        }
    }
    acc
}

fn jacobi_sweeps<T: Scalar>(
    a: &mut [T],
    mut v: Option<&mut Vec<T>>,
    n: usize,
    opts: JacobiOptions,
) -> Result<usize, LinalgError> {
    let total: f64 = a.iter().map(|x| x.abs_sq()).sum();
    let target = (opts.rel_tol * opts.rel_tol) * total;
    if total == 0.0 || n < 2 {
        return Ok(0);
    }
    for sweep in 0..opts.max_sweeps {
        if off_norm_sq(a, n) <= target {
            return Ok(sweep);
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let app = a[p * n + p].re();
                let aqq = a[q * n + q].re();
                let Some(rot) = rotation(app, aqq, apq) else {
                    continue;
                };
                let (c, s, e) = (rot.c, rot.s, rot.phase);
                let se = e.scale(s);
                let sec = e.conj().scale(s);
                // A <- A U
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp.scale(c) - sec * akq;
                    a[k * n + q] = se * akp + akq.scale(c);
                }
                // A <- U^* A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = apk.scale(c) - se * aqk;
                    a[q * n + k] = sec * apk + aqk.scale(c);
                }
                a[p * n + p] = T::from_re(app - rot.t * rot.r);
                a[q * n + q] = T::from_re(aqq + rot.t * rot.r);
                a[p * n + q] = T::ZERO;
                a[q * n + p] = T::ZERO;
                if let Some(v) = v.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp.scale(c) - sec * vkq;
                        v[k * n + q] = se * vkp + vkq.scale(c);
                    }
                }
            }
        }
    }
    if off_norm_sq(a, n) <= target {
        Ok(opts.max_sweeps)
    } else {
        Err(LinalgError::NoConvergence {
            sweeps: opts.max_sweeps,
        })
    }
}
