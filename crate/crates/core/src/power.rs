//! Power iteration on Hermitian matrices, Kostlan's iteration bounds and the
//! truncated-mean experiment over the Gaussian unitary ensemble.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    dot, hermitian_eig, normalize, unit_angle, ComplexMatrix, HermitianSpectrum, LinalgError,
    HERMITIAN_TOL,
};
use crate::sampling::{gue_matrix, uniform_projective, RngStream, SamplingError};
use crate::stats::{mean_se, top_fraction_share};
use crate::weak::{weak_expectation, WeakError};

/// Relative gap `|lambda_1| - |lambda_2| <= tol |lambda_1|` under which the
/// spectrum counts as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-12;
/// `|<x, u_1>|` below this is treated as an orthogonal start.
pub const ORTHOGONAL_TOL: f64 = 1e-14;
/// Default number of random starts used to estimate `rho_alpha(A)`.
pub const DEFAULT_STARTS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Weak(#[from] WeakError),
    #[error("iterate mapped to zero after {0} steps")]
    ZeroIterate(usize),
    #[error("|lambda_1| and |lambda_2| coincide within tolerance")]
    DegenerateSpectrum,
    #[error("start vector is orthogonal to the dominant eigenvector")]
    OrthogonalStart,
    #[error("alpha {0} outside (0, pi/2)")]
    InvalidAlpha(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Kostlan's per-start bounds on `rho_alpha(A, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KostlanBounds {
    /// `-inf` when `x` has no component along `u_2`.
    pub lower: f64,
    /// `-inf` when `x` lies on the dominant line.
    pub upper: f64,
}

impl KostlanBounds {
    /// `lower <= rho <= upper + 1`, with `slack` absorbing rounding in the logs.
    pub fn contains(&self, rho: usize, slack: f64) -> bool {
        let r = rho as f64;
        self.lower <= r + slack && r <= self.upper + 1.0 + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRunResult {
    pub iterations: usize,
    pub converged: bool,
    /// Fubini–Study distance of the last iterate to `u_1`.
    pub final_distance: f64,
    /// Present when the spectrum is non-degenerate and the start not orthogonal.
    pub bounds: Option<KostlanBounds>,
}

/// A Hermitian matrix together with its spectrum, reusable across many starts.
#[derive(Debug, Clone)]
pub struct PowerProblem {
    a: ComplexMatrix,
    spectrum: HermitianSpectrum<Complex64>,
}

impl PowerProblem {
    pub fn new(a: ComplexMatrix) -> Result<Self, PowerError> {
        let spectrum = hermitian_eig(&a, HERMITIAN_TOL)?;
        Ok(Self { a, spectrum })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn spectrum(&self) -> &HermitianSpectrum<Complex64> {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    fn dominant(&self) -> &[Complex64] {
        &self.spectrum.eigenvectors[0]
    }

    /// `|lambda_1| - |lambda_2| <= 1e-12 |lambda_1|`.
    pub fn is_degenerate(&self) -> bool {
        let l = &self.spectrum.eigenvalues;
        l.len() < 2 || l[0].abs() - l[1].abs() <= DEGENERATE_TOL * l[0].abs()
    }

    /// `log |lambda_1| - log |lambda_2|`.
    pub fn log_ratio(&self) -> Result<f64, PowerError> {
        if self.is_degenerate() {
            return Err(PowerError::DegenerateSpectrum);
        }
        let l = &self.spectrum.eigenvalues;
        Ok(l[0].abs().ln() - l[1].abs().ln())
    }

    /// Kostlan's bounds for start `x`:
    /// `(log cot a + log||P_2 x|| - log||P_1 x||) / log(|l_1|/|l_2|)` below and
    /// the same with the projection onto `u_1^perp` above.
    pub fn kostlan_bounds(&self, x: &[Complex64], alpha: f64) -> Result<KostlanBounds, PowerError> {
        check_alpha(alpha)?;
        if x.len() != self.dim() {
            return Err(LinalgError::LengthMismatch(x.len(), self.dim()).into());
        }
        let denom = self.log_ratio()?;
        let mut x = x.to_vec();
        if normalize(&mut x) == 0.0 {
            return Err(LinalgError::ZeroVector.into());
        }
        let u1 = self.dominant();
        let c1 = dot(u1, &x);
        let p1 = c1.norm();
        if p1 <= ORTHOGONAL_TOL {
            return Err(PowerError::OrthogonalStart);
        }
        let p2 = dot(&self.spectrum.eigenvectors[1], &x).norm();
        let perp = x
            .iter()
            .zip(u1)
            .map(|(&xi, &ui)| (xi - c1 * ui).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let lcot = (1.0 / alpha.tan()).ln();
        Ok(KostlanBounds {
            lower: (lcot + p2.ln() - p1.ln()) / denom,
            upper: (lcot + perp.ln() - p1.ln()) / denom,
        })
    }

    /// Kostlan's bounds on the start-averaged `rho_alpha(A)`:
    /// `log cot a / L <= rho <= (½(log n + 2(n-1)/n) + max(0, log cot a)) / L`.
    pub fn expected_bounds(&self, alpha: f64) -> Result<KostlanBounds, PowerError> {
        check_alpha(alpha)?;
        let denom = self.log_ratio()?;
        let n = self.dim() as f64;
        let lcot = (1.0 / alpha.tan()).ln();
        Ok(KostlanBounds {
            lower: lcot / denom,
            upper: (0.5 * (n.ln() + 2.0 * (n - 1.0) / n) + lcot.max(0.0)) / denom,
        })
    }

    /// Iterates `p_k = A p_{k-1} / ||A p_{k-1}||` from `x0` until
    /// `d_R(p_k, u_1) <= alpha` or `k = max_iter`.
    pub fn run(
        &self,
        x0: &[Complex64],
        alpha: f64,
        max_iter: usize,
    ) -> Result<PowerRunResult, PowerError> {
        check_alpha(alpha)?;
        if max_iter == 0 {
            return Err(PowerError::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        let n = self.dim();
        if x0.len() != n {
            return Err(LinalgError::LengthMismatch(x0.len(), n).into());
        }
        let mut p = x0.to_vec();
        if normalize(&mut p) == 0.0 {
            return Err(LinalgError::ZeroVector.into());
        }
        let bounds = if self.is_degenerate() {
            None
        } else {
            match self.kostlan_bounds(&p, alpha) {
                Ok(b) => Some(b),
                Err(PowerError::OrthogonalStart) => None,
                Err(e) => return Err(e),
            }
        };
        let u1 = self.dominant();
        let mut next = vec![Complex64::new(0.0, 0.0); n];
        let mut k = 0;
        let mut dist = unit_angle(&p, u1, 1.0, 1.0);
        while dist > alpha && k < max_iter {
            self.a.mul_vec_into(&p, &mut next);
            if normalize(&mut next) == 0.0 {
                return Err(PowerError::ZeroIterate(k + 1));
            }
            std::mem::swap(&mut p, &mut next);
            k += 1;
            dist = unit_angle(&p, u1, 1.0, 1.0);
        }
        Ok(PowerRunResult {
            iterations: k,
            converged: dist <= alpha,
            final_distance: dist,
            bounds,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<(), PowerError> {
    if alpha > 0.0 && alpha < std::f64::consts::FRAC_PI_2 {
        Ok(())
    } else {
        Err(PowerError::InvalidAlpha(alpha))
    }
}

/// One-shot power iteration (eigendecomposes `a` for the reference vector).
pub fn power_iterate(
    a: &ComplexMatrix,
    x0: &[Complex64],
    alpha: f64,
    max_iter: usize,
) -> Result<PowerRunResult, PowerError> {
    PowerProblem::new(a.clone())?.run(x0, alpha, max_iter)
}

/// One-shot [`PowerProblem::kostlan_bounds`].
pub fn kostlan_bounds(
    a: &ComplexMatrix,
    x: &[Complex64],
    alpha: f64,
) -> Result<KostlanBounds, PowerError> {
    PowerProblem::new(a.clone())?.kostlan_bounds(x, alpha)
}

/// Monte Carlo estimate of `rho_alpha(A) = E_x[rho_alpha(A, x)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub mean: f64,
    pub se: f64,
    /// Runs that hit `max_iter`; counted as `max_iter` in the mean.
    pub nonconverged: usize,
    pub iterations: Vec<usize>,
}

/// Averages `rho_alpha(A, x)` over `trials` uniform projective starts.
pub fn mc_rho(
    problem: &PowerProblem,
    alpha: f64,
    trials: usize,
    max_iter: usize,
    stream: RngStream,
) -> Result<RhoEstimate, PowerError> {
    if trials == 0 {
        return Err(PowerError::InvalidParameter(
            "trials must be at least 1".into(),
        ));
    }
    let mut rng = stream.rng();
    let mut iterations = Vec::with_capacity(trials);
    let mut nonconverged = 0;
    for _ in 0..trials {
        let x = uniform_projective(&mut rng, problem.dim())?;
        let r = problem.run(&x, alpha, max_iter)?;
        if !r.converged {
            nonconverged += 1;
        }
        iterations.push(r.iterations);
    }
    let values: Vec<f64> = iterations.iter().map(|&k| k as f64).collect();
    let m = mean_se(&values);
    Ok(RhoEstimate {
        mean: m.mean,
        se: m.se,
        nonconverged,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GueExperimentConfig {
    pub n: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub max_iter: usize,
    pub starts: usize,
}

impl GueExperimentConfig {
    pub fn new(n: usize, alpha: f64, epsilon: f64, trials: usize) -> Self {
        Self {
            n,
            alpha,
            epsilon,
            trials,
            max_iter: 100_000,
            starts: DEFAULT_STARTS,
        }
    }
}

/// Outcome of the truncated GUE power-iteration experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuePowerReport {
    pub n: usize,
    pub alpha: f64,
    pub epsilon: f64,
    /// Smallest discarded `rho_alpha(H)` estimate.
    pub threshold: f64,
    pub exceptional_count: usize,
    pub conditional_mean_rho: f64,
    pub conditional_se: f64,
    pub raw_mean_rho: f64,
    pub trials: usize,
    /// Start runs over all matrices that hit `max_iter`.
    pub nonconverged_runs: usize,
    /// Share of the raw sum carried by the top 5% of matrices.
    pub top5_share: f64,
    /// Per-matrix `rho_alpha(H)` estimates in trial order.
    pub samples: Vec<f64>,
}

/// Samples GUE matrices, estimates `rho_alpha(H)` for each from random
/// starts and reports the mean after discarding the upper `epsilon` tail.
/// Matrix `i` uses sub-stream `i` of `stream`.
pub fn gue_weak_experiment(
    cfg: &GueExperimentConfig,
    stream: RngStream,
) -> Result<GuePowerReport, PowerError> {
    check_alpha(cfg.alpha)?;
    if cfg.n == 0 || cfg.starts == 0 || cfg.trials == 0 {
        return Err(PowerError::InvalidParameter(
            "n, starts and trials must be positive".into(),
        ));
    }
    let per_trial: Vec<(f64, usize)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| -> Result<(f64, usize), PowerError> {
            let sub = stream.substream(i as u64);
            let h = gue_matrix(&mut sub.rng(), cfg.n)?;
            let problem = PowerProblem::new(h)?;
            let est = mc_rho(
                &problem,
                cfg.alpha,
                cfg.starts,
                cfg.max_iter,
                sub.substream(0),
            )?;
            Ok((est.mean, est.nonconverged))
        })
        .collect::<Result<_, _>>()?;
    let samples: Vec<f64> = per_trial.iter().map(|p| p.0).collect();
    let nonconverged_runs = per_trial.iter().map(|p| p.1).sum();
    let weak = weak_expectation(&samples, cfg.epsilon)?;
    Ok(GuePowerReport {
        n: cfg.n,
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        threshold: weak.threshold,
        exceptional_count: weak.exceptional_count,
        conditional_mean_rho: weak.conditional_mean,
        conditional_se: weak.conditional_se,
        raw_mean_rho: weak.raw_mean,
        trials: cfg.trials,
        nonconverged_runs,
        top5_share: top_fraction_share(&samples, 0.05),
        samples,
    })
}
