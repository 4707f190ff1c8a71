//! Closed convex cones with exact Euclidean projections, polars and Monte
//! Carlo estimators for statistical dimension and Gaussian width.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::linalg::{dot, hermitian_eig, norm, RealMatrix};
use crate::sampling::{standard_normal, RngStream};
use crate::stats::mean_se;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("vector has length {found}, cone lives in R^{expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("subspace spanning vectors are linearly dependent or of the wrong length")]
    InvalidBasis,
    #[error("cannot parse cone spec '{0}': expected full:m, orthant:m, soc:m, psd:s, subspace:k:m or polar:<spec>")]
    Parse(String),
    #[error("need at least 2 trials, got {0}")]
    TooFewTrials(usize),
}

/// Linear subspace of `R^ambient` with an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Vec<f64>>,
}

impl Subspace {
    /// Orthonormalizes `vectors` (modified Gram–Schmidt).
    pub fn new(ambient: usize, vectors: &[Vec<f64>]) -> Result<Self, ConeError> {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.len() != ambient {
                return Err(ConeError::InvalidBasis);
            }
            let scale = norm(v);
            let mut w = v.clone();
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
            let r = norm(&w);
            if r <= 1e-10 * scale || r == 0.0 {
                return Err(ConeError::InvalidBasis);
            }
            w.iter_mut().for_each(|x| *x /= r);
            basis.push(w);
        }
        Ok(Self { ambient, basis })
    }

    /// `span{e_1, ..., e_k}` in `R^m`.
    pub fn coordinate(k: usize, m: usize) -> Self {
        let basis = (0..k.min(m))
            .map(|i| {
                let mut e = vec![0.0; m];
                e[i] = 1.0;
                e
            })
            .collect();
        Self { ambient: m, basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Orthogonal complement, built by sweeping the standard basis.
    pub fn complement(&self) -> Self {
        let mut all = self.basis.clone();
        let mut extra = Vec::new();
        for i in 0..self.ambient {
            if all.len() == self.ambient {
                break;
            }
            let mut w = vec![0.0; self.ambient];
            w[i] = 1.0;
            for _ in 0..2 {
                for b in &all {
                    let c = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
                }
            }
            let r = norm(&w);
            if r > 1e-8 {
                w.iter_mut().for_each(|x| *x /= r);
                all.push(w.clone());
                extra.push(w);
            }
        }
        Self {
            ambient: self.ambient,
            basis: extra,
        }
    }

    fn project_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for b in &self.basis {
            let c = dot(b, v);
            out.iter_mut().zip(b).for_each(|(o, bi)| *o += c * bi);
        }
    }
}

/// Closed convex cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cone {
    FullSpace(usize),
    Subspace(Subspace),
    /// Nonnegative orthant of `R^m`.
    Orthant(usize),
    /// `{(x, t) in R^{m-1} x R : ||x|| <= t}`, height last.
    SecondOrder(usize),
    /// Positive semidefinite `s x s` matrices in `R^{s(s+1)/2}`: upper
    /// triangle row by row, off-diagonal entries scaled by `sqrt 2`.
    Psd(usize),
    PolarOf(Box<Cone>),
}

/// Ambient dimension `s(s+1)/2` of the PSD cone of side `s`.
pub fn svec_len(s: usize) -> usize {
    s * (s + 1) / 2
}

/// Symmetric matrix to its scaled upper-triangle vector.
pub fn svec(a: &RealMatrix) -> Vec<f64> {
    let s = a.rows();
    let mut v = Vec::with_capacity(svec_len(s));
    for i in 0..s {
        v.push(a[(i, i)]);
        for j in i + 1..s {
            v.push(std::f64::consts::SQRT_2 * a[(i, j)]);
        }
    }
    v
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], s: usize) -> RealMatrix {
    let mut a = RealMatrix::zeros(s, s);
    let mut k = 0;
    for i in 0..s {
        a[(i, i)] = v[k];
        k += 1;
        for j in i + 1..s {
            let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
            a[(i, j)] = x;
            a[(j, i)] = x;
            k += 1;
        }
    }
    a
}

/// `E||g||` for `g ~ N(0, I_k)`: `sqrt 2 Gamma((k+1)/2) / Gamma(k/2)`.
pub fn chi_mean(k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let k = k as f64;
    std::f64::consts::SQRT_2 * (ln_gamma((k + 1.0) / 2.0) - ln_gamma(k / 2.0)).exp()
}

impl Cone {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Cone::FullSpace(m) | Cone::Orthant(m) | Cone::SecondOrder(m) => *m,
            Cone::Subspace(s) => s.ambient(),
            Cone::Psd(s) => svec_len(*s),
            Cone::PolarOf(c) => c.ambient_dim(),
        }
    }

    /// True for `{0}`.
    pub fn is_zero(&self) -> bool {
        match self {
            Cone::Subspace(s) => s.dim() == 0,
            Cone::PolarOf(c) => matches!(**c, Cone::FullSpace(_)),
            _ => self.ambient_dim() == 0,
        }
    }

    /// Nearest point of the cone to `v`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, ConeError> {
        let m = self.ambient_dim();
        if v.len() != m {
            return Err(ConeError::DimensionMismatch {
                expected: m,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; m];
        self.project_into(v, &mut out);
        Ok(out)
    }

    /// [`Cone::project`] into a caller buffer; lengths must match.
    pub fn project_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.ambient_dim());
        match self {
            Cone::FullSpace(_) => out.copy_from_slice(v),
            Cone::Subspace(s) => s.project_into(v, out),
            Cone::Orthant(_) => out.iter_mut().zip(v).for_each(|(o, &x)| *o = x.max(0.0)),
            Cone::SecondOrder(m) => project_soc(v, out, *m),
            Cone::Psd(s) => project_psd(v, out, *s),
            Cone::PolarOf(c) => {
                c.project_into(v, out);
                out.iter_mut().zip(v).for_each(|(o, &x)| *o = x - *o);
            }
        }
    }

    /// Polar cone `{z : <x, z> <= 0 for all x in C}`.
    pub fn polar(&self) -> Cone {
        match self {
            Cone::FullSpace(m) => Cone::Subspace(Subspace::coordinate(0, *m)),
            Cone::Subspace(s) if s.dim() == s.ambient() => {
                Cone::Subspace(Subspace::coordinate(0, s.ambient()))
            }
            Cone::Subspace(s) if s.dim() == 0 => Cone::FullSpace(s.ambient()),
            Cone::Subspace(s) => Cone::Subspace(s.complement()),
            Cone::PolarOf(c) => (**c).clone(),
            other => Cone::PolarOf(Box::new(other.clone())),
        }
    }

    /// Statistical dimension where a closed form is known.
    pub fn closed_form_dimension(&self) -> Option<f64> {
        match self {
            Cone::FullSpace(m) => Some(*m as f64),
            Cone::Subspace(s) => Some(s.dim() as f64),
            Cone::Orthant(m) | Cone::SecondOrder(m) => Some(*m as f64 / 2.0),
            Cone::Psd(s) => Some(svec_len(*s) as f64 / 2.0),
            Cone::PolarOf(c) => c
                .closed_form_dimension()
                .map(|d| self.ambient_dim() as f64 - d),
        }
    }

    /// Gaussian width where a closed form is known: chi means for linear
    /// cones, a binomial mixture of chi means for the orthant and its polar.
    pub fn closed_form_width(&self) -> Option<f64> {
        match self {
            Cone::FullSpace(m) => Some(chi_mean(*m)),
            Cone::Subspace(s) => Some(chi_mean(s.dim())),
            Cone::Orthant(m) => Some(orthant_width(*m)),
            Cone::PolarOf(c) => match &**c {
                Cone::Orthant(m) => Some(orthant_width(*m)),
                _ => None,
            },
            _ => None,
        }
    }

    /// Orthonormal basis when the cone is a linear subspace.
    pub fn linear_basis(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            Cone::FullSpace(m) => Some(Subspace::coordinate(*m, *m).basis),
            Cone::Subspace(s) => Some(s.basis.clone()),
            Cone::PolarOf(c) => match &**c {
                Cone::FullSpace(_) | Cone::Subspace(_) => match c.polar() {
                    Cone::PolarOf(_) => None,
                    p => p.linear_basis(),
                },
                _ => None,
            },
            _ => None,
        }
    }
}

fn orthant_width(m: usize) -> f64 {
    // ||max(g, 0)||^2 is chi-squared with Binomial(m, 1/2) degrees of freedom
    let ln_half_m = m as f64 * 0.5f64.ln();
    (0..=m)
        .map(|k| {
            let ln_choose = ln_gamma(m as f64 + 1.0)
                - ln_gamma(k as f64 + 1.0)
                - ln_gamma((m - k) as f64 + 1.0);
            (ln_choose + ln_half_m).exp() * chi_mean(k)
        })
        .sum()
}

fn project_soc(v: &[f64], out: &mut [f64], m: usize) {
    let (x, t) = (&v[..m - 1], v[m - 1]);
    let nx = norm(x);
    if nx <= t {
        out.copy_from_slice(v);
    } else if nx <= -t {
        out.iter_mut().for_each(|o| *o = 0.0);
    } else {
        let h = 0.5 * (nx + t);
        for (o, &xi) in out[..m - 1].iter_mut().zip(x) {
            *o = h * xi / nx;
        }
        out[m - 1] = h;
    }
}

fn project_psd(v: &[f64], out: &mut [f64], s: usize) {
    let a = smat(v, s);
    let spec = hermitian_eig(&a, 1e-8).expect("smat output is symmetric and finite");
    let mut p = RealMatrix::zeros(s, s);
    for (lam, u) in spec.eigenvalues.iter().zip(&spec.eigenvectors) {
        if *lam > 0.0 {
            for i in 0..s {
                for j in 0..s {
                    p[(i, j)] += lam * u[i] * u[j];
                }
            }
        }
    }
    out.copy_from_slice(&svec(&p));
}

impl fmt::Display for Cone {
    /// Spec-string form; a general subspace prints as the coordinate
    /// subspace of the same dimension.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cone::FullSpace(m) => write!(f, "full:{m}"),
            Cone::Subspace(s) => write!(f, "subspace:{}:{}", s.dim(), s.ambient()),
            Cone::Orthant(m) => write!(f, "orthant:{m}"),
            Cone::SecondOrder(m) => write!(f, "soc:{m}"),
            Cone::Psd(s) => write!(f, "psd:{s}"),
            Cone::PolarOf(c) => write!(f, "polar:{c}"),
        }
    }
}

impl FromStr for Cone {
    type Err = ConeError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let err = || ConeError::Parse(spec.to_string());
        let spec = spec.trim();
        if let Some(inner) = spec.strip_prefix("polar:") {
            return Ok(Cone::PolarOf(Box::new(inner.parse().map_err(|_| err())?)));
        }
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |s: &str| s.parse::<usize>().ok().filter(|&v| v >= 1).ok_or_else(err);
        match parts.as_slice() {
            ["full", m] => Ok(Cone::FullSpace(num(m)?)),
            ["orthant", m] => Ok(Cone::Orthant(num(m)?)),
            ["soc", m] if num(m)? >= 2 => Ok(Cone::SecondOrder(num(m)?)),
            ["psd", s] => Ok(Cone::Psd(num(s)?)),
            ["subspace", k, m] => {
                let k: usize = k.parse().map_err(|_| err())?;
                let m = num(m)?;
                if k > m {
                    return Err(err());
                }
                Ok(Cone::Subspace(Subspace::coordinate(k, m)))
            }
            _ => Err(err()),
        }
    }
}

/// Monte Carlo estimates of `delta(C) = E||P_C g||^2` and `w(C) = E||P_C g||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeGeometry {
    pub statistical_dimension: f64,
    pub dimension_se: f64,
    pub gaussian_width: f64,
    pub width_se: f64,
    pub trials: usize,
}

const BLOCK: usize = 2048;

/// Projection norms `||P_C g||` of `trials` Gaussian vectors, in trial order.
pub fn projection_norms(cone: &Cone, trials: usize, stream: RngStream) -> Vec<f64> {
    let m = cone.ambient_dim();
    let blocks = trials.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b as u64).rng();
            let len = BLOCK.min(trials - b * BLOCK);
            let mut g = vec![0.0; m];
            let mut p = vec![0.0; m];
            (0..len)
                .map(|_| {
                    g.iter_mut().for_each(|x| *x = standard_normal(&mut rng));
                    cone.project_into(&g, &mut p);
                    norm(&p)
                })
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

pub fn cone_geometry(
    cone: &Cone,
    trials: usize,
    stream: RngStream,
) -> Result<ConeGeometry, ConeError> {
    if trials < 2 {
        return Err(ConeError::TooFewTrials(trials));
    }
    let norms = projection_norms(cone, trials, stream);
    let sq: Vec<f64> = norms.iter().map(|r| r * r).collect();
    let w = mean_se(&norms);
    let d = mean_se(&sq);
    Ok(ConeGeometry {
        statistical_dimension: d.mean,
        dimension_se: d.se,
        gaussian_width: w.mean,
        width_se: w.se,
        trials,
    })
}

/// Gaussian width from the closed form when available, else Monte Carlo.
pub fn width(cone: &Cone, trials: usize, stream: RngStream) -> Result<f64, ConeError> {
    match cone.closed_form_width() {
        Some(w) => Ok(w),
        None => Ok(cone_geometry(cone, trials, stream)?.gaussian_width),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            Cone::Orthant(2).project(&[1.0, -2.0]).unwrap(),
            vec![1.0, 0.0]
        );
        let soc = Cone::SecondOrder(3);
        assert_eq!(soc.project(&[0.3, 0.4, 1.0]).unwrap(), vec![0.3, 0.4, 1.0]);
        assert_eq!(soc.project(&[0.0, 0.0, -1.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        let psd = Cone::Psd(2);
        let v = svec(&RealMatrix::from_diag(&[1.0, -3.0]));
        let p = psd.project(&v).unwrap();
        assert!(close(&p, &svec(&RealMatrix::from_diag(&[1.0, 0.0])), 1e-12));
        assert_eq!(
            Cone::Orthant(3).project(&[1.0]),
            Err(ConeError::DimensionMismatch {
                expected: 3,
                found: 1
            })
        );
    }

    #[test]
    fn polar_examples() {
        let z = Cone::FullSpace(4).polar();
        assert_eq!(z.project(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0; 4]);
        assert!(z.is_zero());
        let s = Cone::Subspace(Subspace::coordinate(1, 3)).polar();
        assert!(close(
            &s.project(&[1.0, 2.0, 3.0]).unwrap(),
            &[0.0, 2.0, 3.0],
            1e-15
        ));
        let o = Cone::Orthant(2).polar();
        assert_eq!(o.project(&[1.0, -2.0]).unwrap(), vec![0.0, -2.0]);
        assert_eq!(o.polar(), Cone::Orthant(2));
    }

    #[test]
    fn closed_forms() {
        assert_eq!(Cone::Orthant(10).closed_form_dimension(), Some(5.0));
        assert_eq!(Cone::Psd(3).closed_form_dimension(), Some(3.0));
        assert_eq!(Cone::FullSpace(7).closed_form_dimension(), Some(7.0));
        assert_eq!(Cone::Orthant(10).polar().closed_form_dimension(), Some(5.0));
        assert!((chi_mean(1) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert!((orthant_width(1) - 0.5 * chi_mean(1)).abs() < 1e-14);
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in [
            "full:5",
            "orthant:3",
            "soc:4",
            "psd:3",
            "subspace:2:6",
            "polar:orthant:4",
            "polar:polar:soc:3",
        ] {
            let c: Cone = s.parse().unwrap();
            assert_eq!(c.to_string(), s);
        }
        for bad in [
            "",
            "full",
            "full:0",
            "cube:3",
            "subspace:4:3",
            "soc:1",
            "polar:",
        ] {
            assert!(bad.parse::<Cone>().is_err(), "{bad}");
        }
    }

    #[test]
    fn complement_is_orthogonal() {
        let s = Subspace::new(4, &[vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0, 1.0]]).unwrap();
        let c = s.complement();
        assert_eq!(c.dim(), 2);
        for a in s.basis() {
            for b in c.basis() {
                assert!(dot(a, b).abs() < 1e-14);
            }
        }
        assert_eq!(
            Subspace::new(2, &[vec![1.0, 0.0], vec![2.0, 0.0]]),
            Err(ConeError::InvalidBasis)
        );
    }

    #[test]
    fn geometry_small_cases() {
        let g = cone_geometry(&Cone::FullSpace(6), 20_000, RngStream::new(1, 0)).unwrap();
        assert!((g.statistical_dimension - 6.0).abs() <= 3.0 * g.dimension_se);
        let g = cone_geometry(&Cone::Orthant(4), 20_000, RngStream::new(1, 1)).unwrap();
        assert!((g.statistical_dimension - 2.0).abs() <= 3.0 * g.dimension_se);
        assert!((g.gaussian_width - orthant_width(4)).abs() <= 3.0 * g.width_se);
        let g = cone_geometry(&Cone::FullSpace(1), 20_000, RngStream::new(1, 2)).unwrap();
        assert!((g.gaussian_width - 0.7979).abs() <= 3.0 * g.width_se);
    }
}
