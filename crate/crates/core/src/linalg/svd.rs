//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of a working copy are rotated pairwise until mutually orthogonal;
//! the column norms are then the singular values. This keeps high relative
//! accuracy for the small singular values, which is what the condition
//! number code needs.

use super::eigen::rotation;
use super::matrix::Matrix;
use super::scalar::{dot, norm, norm_sq, Scalar};
use super::LinalgError;

const MAX_SWEEPS: usize = 100;

/// Singular values in non-increasing order, optionally with singular vectors.
#[derive(Debug, Clone)]
pub struct SvdResult<T> {
    pub singular_values: Vec<f64>,
    /// Left singular vectors as columns (`rows x k`), `k = min(rows, cols)`.
    pub left: Option<Matrix<T>>,
    /// Right singular vectors as columns (`cols x k`).
    pub right: Option<Matrix<T>>,
}

impl<T: Scalar> SvdResult<T> {
    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// `U diag(s) V^*`, available when vectors were requested.
    pub fn reconstruct(&self) -> Option<Matrix<T>> {
        let (u, v) = (self.left.as_ref()?, self.right.as_ref()?);
        Some(Matrix::from_fn(u.rows(), v.rows(), |i, j| {
            let mut acc = T::ZERO;
            for (k, &s) in self.singular_values.iter().enumerate() {
                acc += (u[(i, k)] * v[(j, k)].conj()).scale(s);
            }
            acc
        }))
    }
}

/// Singular values only.
pub fn svd_values<T: Scalar>(a: &Matrix<T>) -> Result<SvdResult<T>, LinalgError> {
    svd(a, false)
}

pub fn svd<T: Scalar>(a: &Matrix<T>, want_vectors: bool) -> Result<SvdResult<T>, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if a.rows() < a.cols() {
        let r = svd(&a.adjoint(), want_vectors)?;
        return Ok(SvdResult {
            singular_values: r.singular_values,
            left: r.right,
            right: r.left,
        });
    }
    let (m, n) = (a.rows(), a.cols());
    // columns stored contiguously
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Option<Vec<Vec<T>>> = want_vectors.then(|| {
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| if i == j { T::ONE } else { T::ZERO })
                    .collect()
            })
            .collect()
    });
    let mut norms: Vec<f64> = cols.iter().map(|c| norm_sq(c)).collect();
    let ortho_tol = (m as f64) * f64::EPSILON;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (alpha, beta) = (norms[p], norms[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= ortho_tol * (alpha * beta).sqrt() {
                    continue;
                }
                let Some(rot) = rotation(alpha, beta, gamma) else {
                    continue;
                };
                rotated = true;
                let (c, s, e) = (rot.c, rot.s, rot.phase);
                let se = e.scale(s);
                let sec = e.conj().scale(s);
                let (lo, hi) = cols.split_at_mut(q);
                rotate_pair(&mut lo[p], &mut hi[0], c, se, sec);
                if let Some(v) = v.as_mut() {
                    let (lo, hi) = v.split_at_mut(q);
                    rotate_pair(&mut lo[p], &mut hi[0], c, se, sec);
                }
                norms[p] = norm_sq(&cols[p]);
                norms[q] = norm_sq(&cols[q]);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let sigmas: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigmas[j].total_cmp(&sigmas[i]));
    let singular_values: Vec<f64> = order.iter().map(|&i| sigmas[i]).collect();

    let (left, right) = match v {
        Some(v) => {
            let left = Matrix::from_fn(m, n, |i, k| {
                let j = order[k];
                if sigmas[j] > 0.0 {
                    cols[j][i].scale(1.0 / sigmas[j])
                } else {
                    T::ZERO
                }
            });
            let right = Matrix::from_fn(n, n, |i, k| v[order[k]][i]);
            (Some(left), Some(right))
        }
        None => (None, None),
    };
    Ok(SvdResult {
        singular_values,
        left,
        right,
    })
}

#[inline]
fn rotate_pair<T: Scalar>(x: &mut [T], y: &mut [T], c: f64, se: T, sec: T) {
    for (xp, yq) in x.iter_mut().zip(y.iter_mut()) {
        let a = *xp;
        let b = *yq;
        *xp = a.scale(c) - sec * b;
        *yq = se * a + b.scale(c);
    }
}
