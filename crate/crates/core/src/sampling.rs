//! Seedable samplers for every random model in the laboratory.
//!
//! All randomness flows from an [`RngStream`]: a `(seed, index)` pair mapped
//! onto a ChaCha8 generator with the index selecting the ChaCha stream. Nested
//! experiments derive child streams with [`RngStream::substream`], so trial
//! `i` of any experiment is reproducible on its own, independent of how many
//! workers ran the other trials.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use thiserror::Error;

use crate::linalg::{dot, norm, normalize, ComplexMatrix, Matrix, RealMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("dimension must be at least 1")]
    InvalidDimension,
    #[error("cap radius {0} outside (0, 1]")]
    InvalidSigma(f64),
    #[error("cap center must be a unit vector (norm {0})")]
    CenterNotUnit(f64),
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }

    /// Child stream `k` of this stream, e.g. trial `k` of an experiment.
    pub fn substream(&self, k: u64) -> RngStream {
        let mixed =
            splitmix64(self.seed ^ splitmix64(self.index.wrapping_add(0x5851_F42D_4C95_7F2D)));
        RngStream::new(mixed, k)
    }
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `n x m` matrix with i.i.d. standard normal entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
) -> Result<RealMatrix, SamplingError> {
    if n == 0 || m == 0 {
        return Err(SamplingError::InvalidDimension);
    }
    Ok(Matrix::from_fn(n, m, |_, _| standard_normal(rng)))
}

/// Complex Gaussian entries with standard normal real and imaginary parts.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
) -> Result<ComplexMatrix, SamplingError> {
    if n == 0 || m == 0 {
        return Err(SamplingError::InvalidDimension);
    }
    Ok(Matrix::from_fn(n, m, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    }))
}

/// GUE matrix `H = (G + G^*) / 2`, symmetrized so that `H[j][i] == conj(H[i][j])` bitwise.
pub fn gue_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<ComplexMatrix, SamplingError> {
    let g = complex_gaussian_matrix(rng, n, n)?;
    let mut h = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = Complex64::new(g[(i, i)].re, 0.0);
        for j in i + 1..n {
            let v = (g[(i, j)] + g[(j, i)].conj()) * 0.5;
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    Ok(h)
}

/// Uniform point on the unit sphere of `R^ambient_dim`.
pub fn uniform_sphere<R: Rng + ?Sized>(
    rng: &mut R,
    ambient_dim: usize,
) -> Result<Vec<f64>, SamplingError> {
    if ambient_dim == 0 {
        return Err(SamplingError::InvalidDimension);
    }
    loop {
        let mut x: Vec<f64> = (0..ambient_dim).map(|_| standard_normal(rng)).collect();
        if normalize(&mut x) > 0.0 {
            return Ok(x);
        }
    }
}

/// Representative unit vector of a uniform point of `CP^{n-1}`.
pub fn uniform_projective<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
) -> Result<Vec<Complex64>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::InvalidDimension);
    }
    loop {
        let mut x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
            .collect();
        if normalize(&mut x) > 0.0 {
            return Ok(x);
        }
    }
}

/// Uniform sampler on the spherical cap `B(z, sigma) = {x in S^n : ||x - z|| <= sigma}`
/// with chordal radius `sigma`.
///
/// The height `<x, z>` is drawn exactly: for `x` uniform on `S^n`,
/// `(1 - <x,z>) / 2` is `Beta(n/2, n/2)`, so the cap restriction is an
/// inverse-CDF draw on `[0, sigma^2 / 4]`. The direction orthogonal to `z` is
/// uniform on the equator sphere.
#[derive(Debug, Clone)]
pub struct CapSampler {
    center: Vec<f64>,
    sigma: f64,
    shape: f64,
    ln_b: f64,
    v_max: f64,
    cdf_max: f64,
}

impl CapSampler {
    pub fn new(center: &[f64], sigma: f64) -> Result<Self, SamplingError> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(SamplingError::InvalidSigma(sigma));
        }
        if center.is_empty() {
            return Err(SamplingError::InvalidDimension);
        }
        let nz = norm(center);
        if (nz - 1.0).abs() > 1e-12 {
            return Err(SamplingError::CenterNotUnit(nz));
        }
        let sphere_dim = center.len() - 1;
        let shape = sphere_dim as f64 / 2.0;
        let v_max = sigma * sigma / 4.0;
        let (ln_b, cdf_max) = if sphere_dim == 0 {
            (0.0, 1.0)
        } else {
            (ln_beta(shape, shape), beta_reg(shape, shape, v_max))
        };
        Ok(Self {
            center: center.to_vec(),
            sigma,
            shape,
            ln_b,
            v_max,
            cdf_max,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Fraction of the sphere's surface covered by the cap.
    pub fn cap_fraction(&self) -> f64 {
        self.cdf_max
    }

    /// Solves `I_v(a, a) = target` on `[0, v_max]` by safeguarded Newton.
    fn invert(&self, target: f64) -> f64 {
        let a = self.shape;
        let (mut lo, mut hi) = (0.0, self.v_max);
        let mut v = 0.5 * (lo + hi);
        for _ in 0..100 {
            let f = beta_reg(a, a, v) - target;
            if f > 0.0 {
                hi = v;
            } else {
                lo = v;
            }
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
            let log_pdf = (a - 1.0) * (v.ln() + (1.0 - v).ln()) - self.ln_b;
            let step = f / log_pdf.exp();
            let next = v - step;
            if next.is_finite() && next > lo && next < hi {
                v = next;
                if step.abs() <= 1e-15 * v {
                    break;
                }
            } else {
                v = 0.5 * (lo + hi);
            }
        }
        v
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let dim = self.center.len();
        if dim == 1 {
            return self.center.clone();
        }
        let u: f64 = rng.random();
        let v = self.invert(u * self.cdf_max);
        // height t = <x, z> = 1 - 2v, orthogonal weight sqrt(1 - t^2) = 2 sqrt(v (1 - v))
        let t = 1.0 - 2.0 * v;
        let r = 2.0 * (v * (1.0 - v)).sqrt();
        let dir = self.equator_direction(rng);
        self.center
            .iter()
            .zip(&dir)
            .map(|(&z, &d)| t * z + r * d)
            .collect()
    }

    fn equator_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let mut g: Vec<f64> = (0..self.center.len())
                .map(|_| standard_normal(rng))
                .collect();
            let proj = dot(&self.center, &g);
            for (gi, &zi) in g.iter_mut().zip(&self.center) {
                *gi -= proj * zi;
            }
            if normalize(&mut g) > 1e-8 {
                return g;
            }
        }
    }
}

/// One uniform draw from the cap `B(z, sigma)`.
pub fn uniform_cap<R: Rng + ?Sized>(
    rng: &mut R,
    z: &[f64],
    sigma: f64,
) -> Result<Vec<f64>, SamplingError> {
    Ok(CapSampler::new(z, sigma)?.sample(rng))
}

/// Rejection sampler for the same cap law; a cross-check path, efficient
/// only when the cap covers a sizeable part of the sphere.
pub fn uniform_cap_rejection<R: Rng + ?Sized>(
    rng: &mut R,
    z: &[f64],
    sigma: f64,
) -> Result<Vec<f64>, SamplingError> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(SamplingError::InvalidSigma(sigma));
    }
    loop {
        let x = uniform_sphere(rng, z.len())?;
        let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 <= sigma * sigma {
            return Ok(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_two_sample, mean_se};

    #[test]
    fn gaussian_moments() {
        let mut rng = RngStream::new(1, 0).rng();
        let xs: Vec<f64> = (0..100_000)
            .map(|_| gaussian_matrix(&mut rng, 1, 1).unwrap()[(0, 0)])
            .collect();
        let m = mean_se(&xs);
        assert!(m.mean.abs() < 3.0 * 10f64.powf(-2.5));
        let var = xs.iter().map(|x| (x - m.mean).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn determinism_and_shape() {
        let s = RngStream::new(42, 3);
        let a = gaussian_matrix(&mut s.rng(), 2, 3).unwrap();
        let b = gaussian_matrix(&mut s.rng(), 2, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.rows(), a.cols()), (2, 3));
        assert_eq!(
            gaussian_matrix(&mut s.rng(), 0, 3),
            Err(SamplingError::InvalidDimension)
        );
    }

    #[test]
    fn streams_are_uncorrelated() {
        let mut r0 = RngStream::new(9, 0).rng();
        let mut r1 = RngStream::new(9, 1).rng();
        let n = 100_000;
        let a: Vec<f64> = (0..n).map(|_| standard_normal(&mut r0)).collect();
        let b: Vec<f64> = (0..n).map(|_| standard_normal(&mut r1)).collect();
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn gue_is_exactly_hermitian_with_stated_variances() {
        let mut rng = RngStream::new(2, 0).rng();
        let h = gue_matrix(&mut rng, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(h[(i, j)], h[(j, i)].conj());
            }
        }
        let n = 100_000;
        let (mut d, mut off) = (0.0, 0.0);
        for _ in 0..n {
            let h = gue_matrix(&mut rng, 2).unwrap();
            d += h[(0, 0)].re * h[(0, 0)].re;
            off += h[(0, 1)].norm_sqr();
        }
        assert!((d / n as f64 - 1.0).abs() < 0.03);
        assert!((off / n as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn sphere_moments() {
        let mut rng = RngStream::new(3, 0).rng();
        let n = 100_000;
        let mut mean = [0.0; 3];
        let mut x1sq = 0.0;
        for _ in 0..n {
            let x = uniform_sphere(&mut rng, 3).unwrap();
            assert!((norm(&x) - 1.0).abs() < 1e-14);
            for k in 0..3 {
                mean[k] += x[k];
            }
            x1sq += x[0] * x[0];
        }
        for m in mean {
            assert!((m / n as f64).abs() < 0.02);
        }
        assert!((x1sq / n as f64 - 1.0 / 3.0).abs() < 0.03 / 3.0);
    }

    #[test]
    fn cap_samples_stay_in_cap_and_are_symmetric() {
        let z = [0.0, 0.6, 0.8, 0.0];
        let sigma = 0.3;
        let sampler = CapSampler::new(&z, sigma).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        let n = 100_000;
        let mut perp_mean = [0.0; 4];
        let mut perp_sq = 0.0;
        for _ in 0..n {
            let x = sampler.sample(&mut rng);
            assert!((norm(&x) - 1.0).abs() < 1e-12);
            let d: f64 = x
                .iter()
                .zip(&z)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(d <= sigma * (1.0 + 1e-12));
            let h = dot(&x, &z);
            for k in 0..4 {
                let p = x[k] - h * z[k];
                perp_mean[k] += p;
                perp_sq += p * p;
            }
        }
        // each coordinate of the orthogonal part has variance <= perp_sq / n
        let band = 3.0 * (perp_sq / n as f64 / n as f64).sqrt();
        for m in perp_mean {
            assert!((m / n as f64).abs() <= band, "{} vs {band}", m / n as f64);
        }
    }

    #[test]
    fn cap_area_by_hit_counting() {
        // sigma = 1 on S^2: cos(theta_max) = 1/2, area fraction (1 - 1/2) / 2 = 1/4
        let z = [1.0, 0.0, 0.0];
        let sampler = CapSampler::new(&z, 1.0).unwrap();
        assert!((sampler.cap_fraction() - 0.25).abs() < 1e-12);
        let mut rng = RngStream::new(5, 0).rng();
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| {
                let x = uniform_sphere(&mut rng, 3).unwrap();
                x.iter()
                    .zip(&z)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    <= 1.0
            })
            .count();
        let frac = hits as f64 / n as f64;
        assert!((frac / 0.25 - 1.0).abs() < 0.01, "{frac}");
    }

    #[test]
    fn cap_inverse_cdf_matches_rejection() {
        let z = [0.0, 0.0, 1.0, 0.0, 0.0];
        let sampler = CapSampler::new(&z, 0.9).unwrap();
        let mut r1 = RngStream::new(6, 0).rng();
        let mut r2 = RngStream::new(6, 1).rng();
        let n = 20_000;
        let a: Vec<f64> = (0..n).map(|_| dot(&sampler.sample(&mut r1), &z)).collect();
        let b: Vec<f64> = (0..n)
            .map(|_| dot(&uniform_cap_rejection(&mut r2, &z, 0.9).unwrap(), &z))
            .collect();
        // 99.9% two-sample KS critical value at n = m = 20000 is about 0.0195
        assert!(ks_two_sample(&a, &b) < 0.0195);
    }

    #[test]
    fn cap_inverse_cdf_round_trips() {
        for (dim, sigma) in [(2, 0.5), (3, 1.0), (5, 0.9), (12, 0.1)] {
            let mut z = vec![0.0; dim];
            z[0] = 1.0;
            let s = CapSampler::new(&z, sigma).unwrap();
            let a = (dim - 1) as f64 / 2.0;
            for k in 0..=200 {
                let u = k as f64 / 200.0;
                let v = s.invert(u * s.cdf_max);
                assert!((0.0..=s.v_max).contains(&v));
                assert!(
                    (beta_reg(a, a, v) / s.cdf_max - u).abs() < 1e-10,
                    "dim {dim} u {u}"
                );
            }
        }
    }

    #[test]
    fn cap_rejects_bad_sigma() {
        let z = [1.0, 0.0];
        let mut rng = RngStream::new(0, 0).rng();
        assert_eq!(
            uniform_cap(&mut rng, &z, 0.0),
            Err(SamplingError::InvalidSigma(0.0))
        );
        assert_eq!(
            uniform_cap(&mut rng, &z, 1.5),
            Err(SamplingError::InvalidSigma(1.5))
        );
    }

    #[test]
    fn projective_moments_and_unitary_invariance() {
        let mut rng = RngStream::new(7, 0).rng();
        let n = 100_000;
        let mut first = Vec::with_capacity(n);
        let mut rotated = Vec::with_capacity(n);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut e1 = 0.0;
        for _ in 0..n {
            let x = uniform_projective(&mut rng, 4).unwrap();
            assert!((norm(&x) - 1.0).abs() < 1e-14);
            e1 += x[0].norm_sqr();
            first.push(x[0].norm());
            // fixed unitary mixing coordinates 1 and 2 with a phase
            let ux0 = (x[0] + Complex64::i() * x[1]) * h;
            rotated.push(ux0.norm());
        }
        assert!((e1 / n as f64 - 0.25).abs() < 0.03 * 0.25);
        let mut rng2 = RngStream::new(7, 1).rng();
        let fresh: Vec<f64> = (0..n)
            .map(|_| uniform_projective(&mut rng2, 4).unwrap()[0].norm())
            .collect();
        assert!(ks_two_sample(&fresh, &rotated) < 0.02);
        assert!(ks_two_sample(&fresh, &first) < 0.02);
    }
}
