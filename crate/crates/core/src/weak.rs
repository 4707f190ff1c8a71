//! Truncated expectations, conic condition numbers and their tail bounds.
//!
//! The central object is [`weak_expectation`]: drop the `ceil(eps N)` largest
//! samples and average the rest. Removing the upper tail is the optimal way
//! to spend an exceptional-set budget of measure `eps`, so this is the
//! empirical counterpart of a weak average-case bound.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{norm, svd_values, LinalgError, RealMatrix};
use crate::sampling::{CapSampler, RngStream, SamplingError};
use crate::stats::proportion_se;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeakError {
    #[error("no samples supplied")]
    EmptyInput,
    #[error("epsilon {0} outside [0, 1)")]
    InvalidEpsilon(f64),
    #[error("truncation at epsilon {epsilon} removes all {count} samples")]
    AllSamplesExceptional { epsilon: f64, count: usize },
    #[error("sample {0} is NaN")]
    NanSample(usize),
    #[error("need t > a > 0, got a = {a}, t = {t}")]
    InvalidRange { a: f64, t: f64 },
    #[error("invalid setup: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Result of discarding the empirical upper `eps`-quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakExpectationReport {
    pub epsilon: f64,
    /// Smallest removed sample; `+inf` when nothing was removed.
    pub threshold: f64,
    pub conditional_mean: f64,
    pub conditional_se: f64,
    pub raw_mean: f64,
    pub exceptional_count: usize,
    pub sample_count: usize,
}

/// Number of samples removed at level `epsilon`.
pub fn exceptional_count(n: usize, epsilon: f64) -> usize {
    ((epsilon * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Conditional mean after removing the `ceil(epsilon N)` largest samples.
///
/// Ties are resolved by sample order: among equal values the later ones are
/// removed first. `+inf` samples sort to the top. `epsilon = 0` removes
/// nothing and reproduces the raw mean exactly.
pub fn weak_expectation(samples: &[f64], epsilon: f64) -> Result<WeakExpectationReport, WeakError> {
    if samples.is_empty() {
        return Err(WeakError::EmptyInput);
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(WeakError::InvalidEpsilon(epsilon));
    }
    if let Some(i) = samples.iter().position(|v| v.is_nan()) {
        return Err(WeakError::NanSample(i));
    }
    let n = samples.len();
    let k = exceptional_count(n, epsilon);
    if k >= n {
        return Err(WeakError::AllSamplesExceptional { epsilon, count: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| samples[i].total_cmp(&samples[j]));
    let mut removed = vec![false; n];
    for &i in &order[n - k..] {
        removed[i] = true;
    }
    let threshold = if k == 0 {
        f64::INFINITY
    } else {
        samples[order[n - k]]
    };

    let kept = (n - k) as f64;
    let mut sum = 0.0;
    for (v, _) in samples.iter().zip(&removed).filter(|(_, r)| !**r) {
        sum += v;
    }
    let conditional_mean = sum / kept;
    let conditional_se = if n - k > 1 {
        let ss: f64 = samples
            .iter()
            .zip(&removed)
            .filter(|(_, r)| !**r)
            .map(|(v, _)| (v - conditional_mean).powi(2))
            .sum();
        (ss / (kept - 1.0) / kept).sqrt()
    } else {
        0.0
    };
    let raw_mean = samples.iter().sum::<f64>() / n as f64;
    Ok(WeakExpectationReport {
        epsilon,
        threshold,
        conditional_mean,
        conditional_se,
        raw_mean,
        exceptional_count: k,
        sample_count: n,
    })
}

/// `C(x) = ||x|| / dist(x, Sigma)` for unit `x`; infinite on `Sigma`.
pub fn conic_condition(dist_to_sigma: f64) -> f64 {
    if dist_to_sigma == 0.0 {
        f64::INFINITY
    } else {
        1.0 / dist_to_sigma
    }
}

/// Frobenius condition number `||A||_F / sigma_min(A)`.
pub fn kappa_frobenius(a: &RealMatrix) -> Result<f64, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let smin = svd_values(a)?.smallest();
    Ok(if smin == 0.0 {
        f64::INFINITY
    } else {
        a.frobenius_norm() / smin
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub bound: f64,
    /// Whether `t` lies in the range where the bound is proved.
    pub valid: bool,
}

/// Cap tail bound `P{C(x) > t} < 13 d n / (t sigma)`, proved for
/// `t >= (1 + 2d)(n - 1) / sigma`.
pub fn bcl_tail_bound(d: u32, n: u32, sigma: f64, t: f64) -> TailBound {
    let (d, n) = (f64::from(d), f64::from(n));
    TailBound {
        bound: 13.0 * d * n / (t * sigma),
        valid: t >= (1.0 + 2.0 * d) * (n - 1.0) / sigma,
    }
}

/// Bound on `E[X | X <= t]` for `X >= 0` with `P{X > s} <= a / s`:
/// `a / (1 - a/t) * (1 - ln(a/t))`.
pub fn probexp_bound(a: f64, t: f64) -> Result<f64, WeakError> {
    if !(a > 0.0 && t > a) {
        return Err(WeakError::InvalidRange { a, t });
    }
    let r = a / t;
    Ok(a / (1.0 - r) * (1.0 - r.ln()))
}

/// Conditional-mean bound `13 d n (n + 1) / ((1 - e^{-n}) sigma)` outside an
/// exceptional set of measure below `e^{-n}`.
pub fn conic_theorem_bound(d: u32, n: u32, sigma: f64) -> f64 {
    let (d, n) = (f64::from(d), f64::from(n));
    13.0 * d * n * (n + 1.0) / ((1.0 - (-n).exp()) * sigma)
}

/// Truncation level `a e^n` (`a = 13 d n / sigma`) defining that exceptional set.
pub fn conic_exceptional_threshold(d: u32, n: u32, sigma: f64) -> f64 {
    13.0 * f64::from(d) * f64::from(n) / sigma * f64::from(n).exp()
}

/// Euclidean distance from a point of the unit sphere to a scale-invariant set.
pub trait DistanceOracle: Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn distance(&self, x: &[f64]) -> f64;
}

/// `Sigma = {x : <x, normal> = 0}`; distance `|<x, normal>|`.
#[derive(Debug, Clone)]
pub struct Hyperplane {
    normal: Vec<f64>,
}

impl Hyperplane {
    pub fn new(mut normal: Vec<f64>) -> Result<Self, WeakError> {
        if crate::linalg::normalize(&mut normal) == 0.0 {
            return Err(WeakError::InvalidSetup("hyperplane normal is zero".into()));
        }
        Ok(Self { normal })
    }

    /// The coordinate hyperplane `{x_1 = 0}` in `R^ambient`.
    pub fn coordinate(ambient: usize) -> Self {
        let mut normal = vec![0.0; ambient];
        normal[0] = 1.0;
        Self { normal }
    }
}

impl DistanceOracle for Hyperplane {
    fn ambient_dim(&self) -> usize {
        self.normal.len()
    }

    fn distance(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.normal, x).abs()
    }
}

/// Singular `k x k` matrices, points stored row-major; distance `sigma_min`.
#[derive(Debug, Clone, Copy)]
pub struct SingularMatrices {
    pub k: usize,
}

impl DistanceOracle for SingularMatrices {
    fn ambient_dim(&self) -> usize {
        self.k * self.k
    }

    fn distance(&self, x: &[f64]) -> f64 {
        let a = RealMatrix::from_vec(self.k, self.k, x.to_vec()).expect("shape checked by caller");
        svd_values(&a).map(|s| s.smallest()).unwrap_or(f64::NAN)
    }
}

/// Brute-force oracle over unit points of `Sigma`, each standing for the ray
/// it spans: `dist(x, ray y) = sqrt(||x||^2 - <x,y>_+^2)`.
#[derive(Debug, Clone)]
pub struct GridDistance {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl GridDistance {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, WeakError> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| WeakError::InvalidSetup("empty grid".into()))?;
        if points
            .iter()
            .any(|p| p.len() != dim || (norm(p) - 1.0).abs() > 1e-9)
        {
            return Err(WeakError::InvalidSetup(
                "grid points must be unit vectors of equal length".into(),
            ));
        }
        Ok(Self { dim, points })
    }
}

impl DistanceOracle for GridDistance {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn distance(&self, x: &[f64]) -> f64 {
        let xx = crate::linalg::norm_sq(x);
        let best = self
            .points
            .iter()
            .map(|y| crate::linalg::dot(x, y).max(0.0))
            .fold(0.0, f64::max);
        (xx - best * best).max(0.0).sqrt()
    }
}

/// Cap experiment for a conic condition number on `S^n`.
#[derive(Clone)]
pub struct ConicConditionSetup {
    /// Sphere dimension `n` (ambient `n + 1`).
    pub n: u32,
    /// Degree bound of the polynomials cutting out `Sigma`.
    pub d: u32,
    pub center: Vec<f64>,
    pub sigma: f64,
    pub oracle: Arc<dyn DistanceOracle>,
}

impl std::fmt::Debug for ConicConditionSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConicConditionSetup")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("center", &self.center)
            .field("sigma", &self.sigma)
            .finish_non_exhaustive()
    }
}

impl ConicConditionSetup {
    /// `Sigma = {x_1 = 0}` in `S^n`, degree 1, cap centred at `e_2 in Sigma`.
    pub fn hyperplane(n: u32, sigma: f64) -> Self {
        let ambient = n as usize + 1;
        let mut center = vec![0.0; ambient];
        center[1.min(ambient - 1)] = 1.0;
        Self {
            n,
            d: 1,
            center,
            sigma,
            oracle: Arc::new(Hyperplane::coordinate(ambient)),
        }
    }

    /// Singular `k x k` matrices in `S^{k^2 - 1}`, degree `k`, cap centred
    /// at the normalized singular matrix `diag(1, ..., 1, 0)`.
    pub fn singular_matrices(k: usize, sigma: f64) -> Self {
        let mut center = vec![0.0; k * k];
        let scale = 1.0 / ((k.max(2) - 1) as f64).sqrt();
        for i in 0..k.saturating_sub(1) {
            center[i * k + i] = scale;
        }
        if k == 1 {
            center[0] = 1.0;
        }
        Self {
            n: (k * k - 1) as u32,
            d: k as u32,
            center,
            sigma,
            oracle: Arc::new(SingularMatrices { k }),
        }
    }

    fn validate(&self) -> Result<(), WeakError> {
        if self.d == 0 || self.n == 0 {
            return Err(WeakError::InvalidSetup("need d >= 1 and n >= 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(SamplingError::InvalidSigma(self.sigma).into());
        }
        let ambient = self.n as usize + 1;
        if self.center.len() != ambient || self.oracle.ambient_dim() != ambient {
            return Err(WeakError::InvalidSetup(format!(
                "center and oracle must live in R^{ambient}"
            )));
        }
        Ok(())
    }

    /// `13 d n / sigma`, the constant of the cap tail bound.
    pub fn tail_constant(&self) -> f64 {
        13.0 * f64::from(self.d) * f64::from(self.n) / self.sigma
    }
}

/// One point of an empirical tail curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub empirical: f64,
    pub se: f64,
    pub bcl_bound: f64,
    pub valid: bool,
}

/// Log-spaced grid of `points` values from `t_min` to `t_max`.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![t_min];
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Empirical `P{X > t}` with its standard error at each `t`.
pub fn empirical_tail(samples: &[f64], ts: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    ts.iter()
        .map(|&t| {
            let above = n - sorted.partition_point(|&v| v <= t);
            let p = above as f64 / n as f64;
            (t, p, proportion_se(p, n))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapExperiment {
    pub tail: Vec<TailPoint>,
    pub weak: WeakExpectationReport,
    pub theorem_bound: f64,
    /// `a e^n`, the analytic truncation level of the theorem.
    pub t_epsilon: f64,
    /// Condition numbers in sample order.
    pub samples: Vec<f64>,
}

const BLOCK: usize = 4096;

/// Condition numbers of `trials` uniform cap samples, reproducible for any
/// worker count: sample `i` comes from block `i / 4096`'s sub-stream.
pub fn cap_condition_samples(
    setup: &ConicConditionSetup,
    trials: usize,
    stream: RngStream,
) -> Result<Vec<f64>, WeakError> {
    setup.validate()?;
    let sampler = CapSampler::new(&setup.center, setup.sigma)?;
    let blocks = trials.div_ceil(BLOCK);
    let out: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b as u64).rng();
            let len = BLOCK.min(trials - b * BLOCK);
            (0..len)
                .map(|_| {
                    let x = sampler.sample(&mut rng);
                    conic_condition(setup.oracle.distance(&x))
                })
                .collect()
        })
        .collect();
    Ok(out.concat())
}

/// Samples the cap, records the tail curve against the cap tail bound, the
/// truncated mean at `epsilon` and the theorem's analytic bound.
pub fn conic_cap_experiment(
    setup: &ConicConditionSetup,
    trials: usize,
    epsilon: f64,
    t_grid: &[f64],
    stream: RngStream,
) -> Result<CapExperiment, WeakError> {
    if trials < 100 {
        return Err(WeakError::InvalidSetup(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    let samples = cap_condition_samples(setup, trials, stream)?;
    let tail = empirical_tail(&samples, t_grid)
        .into_iter()
        .map(|(t, empirical, se)| {
            let b = bcl_tail_bound(setup.d, setup.n, setup.sigma, t);
            TailPoint {
                t,
                empirical,
                se,
                bcl_bound: b.bound,
                valid: b.valid,
            }
        })
        .collect();
    let weak = weak_expectation(&samples, epsilon)?;
    Ok(CapExperiment {
        tail,
        weak,
        theorem_bound: conic_theorem_bound(setup.d, setup.n, setup.sigma),
        t_epsilon: conic_exceptional_threshold(setup.d, setup.n, setup.sigma),
        samples,
    })
}
