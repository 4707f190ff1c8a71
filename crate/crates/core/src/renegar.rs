//! Renegar's condition number for biconic feasibility problems.
//!
//! For `A: R^m -> R^n` and closed convex cones `C ⊆ R^m`, `D ⊆ R^n`, the
//! smallest restricted singular value is
//! `sigma_{C,D}(A) = min_{x in C, ||x|| = 1} ||P_D(A x)||` and
//! `R_{C,D}(A) = min(||A|| / sigma_{C,D}(A), ||A|| / sigma_{D,C}(-A^T))`.
//!
//! When both cones are linear subspaces the minimum is a singular value and
//! is computed exactly. Otherwise it is a nonconvex problem; the solver runs
//! spectral projected gradient from many random starts and reports an upper
//! bound together with a quality flag.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cones::{chi_mean, width, Cone, ConeError};
use crate::linalg::{dot, norm, norm_sq, spectral_norm, svd_values, LinalgError, RealMatrix};
use crate::quadrature::{integrate_with_breaks, QuadError, QuadOptions};
use crate::sampling::{gaussian_matrix, standard_normal, RngStream, SamplingError};
use crate::weak::{weak_expectation, WeakError, WeakExpectationReport};

/// Restricted singular values at or below this (relative to `||A||`) count
/// as zero.
pub const ZERO_TOL: f64 = 1e-8;
/// Solver runs stop once `sigma / ||A||` falls below this.
const ZERO_FLOOR: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenegarError {
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Weak(#[from] WeakError),
    #[error("matrix is {rows}x{cols} but cones live in R^{m} and R^{n}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        m: usize,
        n: usize,
    },
    #[error("the domain cone is {{0}}; the restricted minimum is over an empty set")]
    ZeroCone,
    #[error("matrix is zero")]
    ZeroMatrix,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Effort and reproducibility settings for the nonconvex solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverBudget {
    pub restarts: usize,
    pub max_steps: usize,
    /// Stop a run when the relative decrease of the objective falls below this.
    pub rel_tol: f64,
    /// Random points of `C ∩ S` scored before choosing the starts.
    pub search_samples: usize,
    /// Restart values within this of the best (relative to `||A||`) agree.
    pub agreement_tol: f64,
    pub stream: RngStream,
}

impl Default for SolverBudget {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_steps: 10_000,
            rel_tol: 1e-12,
            search_samples: 256,
            agreement_tol: 1e-6,
            stream: RngStream::new(0, 0),
        }
    }
}

impl SolverBudget {
    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self.search_samples = self.search_samples.max(4 * restarts);
        self
    }

    pub fn with_stream(mut self, stream: RngStream) -> Self {
        self.stream = stream;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SresQuality {
    /// Computed by an SVD.
    Exact,
    /// Reached the zero floor, or at least two restarts agree on the minimum.
    Confirmed,
    /// Restarts disagree; the value is still the best upper bound found.
    Stalled,
}

impl SresQuality {
    pub fn worst(self, other: Self) -> Self {
        use SresQuality::*;
        match (self, other) {
            (Stalled, _) | (_, Stalled) => Stalled,
            (Confirmed, _) | (_, Confirmed) => Confirmed,
            _ => Exact,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SresQuality::Exact => "exact",
            SresQuality::Confirmed => "confirmed",
            SresQuality::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SresResult {
    pub value: f64,
    pub quality: SresQuality,
    /// Restarts whose final value agreed with the best.
    pub agreeing: usize,
    /// Minimizer found, when the solver path produced one.
    pub argmin: Option<Vec<f64>>,
}

/// Matrix with domain and codomain cones.
#[derive(Debug, Clone, PartialEq)]
pub struct BiconicProblem {
    pub a: RealMatrix,
    pub c: Cone,
    pub d: Cone,
}

impl BiconicProblem {
    pub fn new(a: RealMatrix, c: Cone, d: Cone) -> Result<Self, RenegarError> {
        check_shapes(&a, &c, &d)?;
        Ok(Self { a, c, d })
    }

    /// `(-A^T, D, C)`, the exchanged problem.
    pub fn dual(&self) -> Self {
        Self {
            a: self.a.transpose().scaled(-1.0),
            c: self.d.clone(),
            d: self.c.clone(),
        }
    }
}

fn check_shapes(a: &RealMatrix, c: &Cone, d: &Cone) -> Result<(), RenegarError> {
    if a.cols() != c.ambient_dim() || a.rows() != d.ambient_dim() {
        return Err(RenegarError::ShapeMismatch {
            rows: a.rows(),
            cols: a.cols(),
            m: c.ambient_dim(),
            n: d.ambient_dim(),
        });
    }
    Ok(())
}

/// `sigma_{C,D}(A) = min_{x in C ∩ S^{m-1}} ||P_D(A x)||`.
pub fn restricted_singular_value(
    a: &RealMatrix,
    c: &Cone,
    d: &Cone,
    budget: &SolverBudget,
) -> Result<SresResult, RenegarError> {
    check_shapes(a, c, d)?;
    if c.is_zero() {
        return Err(RenegarError::ZeroCone);
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite.into());
    }
    if let Some(v) = exact_route(a, c, d)? {
        return Ok(SresResult {
            value: v,
            quality: SresQuality::Exact,
            agreeing: 0,
            argmin: None,
        });
    }
    let scale = spectral_norm(a)?;
    if scale == 0.0 {
        return Ok(SresResult {
            value: 0.0,
            quality: SresQuality::Exact,
            agreeing: 0,
            argmin: None,
        });
    }
    let an = a.scaled(1.0 / scale);
    let mut r = solve(&an, c, d, budget)?;
    r.value *= scale;
    Ok(r)
}

fn exact_route(a: &RealMatrix, c: &Cone, d: &Cone) -> Result<Option<f64>, RenegarError> {
    if d.is_zero() {
        return Ok(Some(0.0));
    }
    let Some(bc) = c.linear_basis() else {
        return Ok(None);
    };
    // a linear domain larger than the codomain meets ker(A)
    if bc.len() > a.rows() {
        return Ok(Some(0.0));
    }
    let Some(bd) = d.linear_basis() else {
        return Ok(None);
    };
    if bc.len() > bd.len() {
        return Ok(Some(0.0));
    }
    let m = match (c, d) {
        (Cone::FullSpace(_), Cone::FullSpace(_)) => a.clone(),
        _ => {
            let abc: Vec<Vec<f64>> = bc.iter().map(|x| a.mul_vec(x)).collect();
            RealMatrix::from_fn(bd.len(), bc.len(), |i, j| dot(&bd[i], &abc[j]))
        }
    };
    let sv = svd_values(&m)?;
    Ok(Some(
        sv.singular_values.get(bc.len() - 1).copied().unwrap_or(0.0),
    ))
}

/// Objective `f(x) = ½ ||P_D(A x)||^2` with gradient `A^T P_D(A x)`.
struct Objective<'a> {
    a: &'a RealMatrix,
    d: &'a Cone,
    /// `A^T A` when `D` is the full space.
    gram: Option<RealMatrix>,
    y: Vec<f64>,
    p: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(a: &'a RealMatrix, d: &'a Cone) -> Self {
        let gram = matches!(d, Cone::FullSpace(_)).then(|| a.gram());
        Self {
            a,
            d,
            gram,
            y: vec![0.0; a.rows()],
            p: vec![0.0; a.rows()],
        }
    }

    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        if let Some(g) = &self.gram {
            g.mul_vec_into(x, grad);
            return (0.5 * dot(x, grad)).max(0.0);
        }
        self.a.mul_vec_into(x, &mut self.y);
        self.d.project_into(&self.y, &mut self.p);
        grad.iter_mut().for_each(|v| *v = 0.0);
        for (i, &pi) in self.p.iter().enumerate() {
            if pi != 0.0 {
                for (gj, &aij) in grad.iter_mut().zip(self.a.row(i)) {
                    *gj += aij * pi;
                }
            }
        }
        0.5 * norm_sq(&self.p)
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.eval(x, &mut g)
    }
}

/// Nearest point of `C ∩ S` to `z`: the normalized projection; `false` when
/// `P_C(z) = 0`.
fn project_sphere(c: &Cone, z: &[f64], out: &mut [f64]) -> bool {
    c.project_into(z, out);
    let r = norm(out);
    if r <= 1e-300 {
        return false;
    }
    out.iter_mut().for_each(|v| *v /= r);
    true
}

fn random_point<R: rand::Rng>(c: &Cone, rng: &mut R) -> Option<Vec<f64>> {
    let m = c.ambient_dim();
    let mut out = vec![0.0; m];
    for _ in 0..1000 {
        let g: Vec<f64> = (0..m).map(|_| standard_normal(rng)).collect();
        if project_sphere(c, &g, &mut out) {
            return Some(out);
        }
    }
    None
}

struct RunOutcome {
    f: f64,
    x: Vec<f64>,
}

/// Spectral projected gradient on `C ∩ S` with Armijo backtracking; works
/// with the tangential gradient so that steps never flip through the origin.
fn descend(obj: &mut Objective<'_>, c: &Cone, x0: Vec<f64>, budget: &SolverBudget) -> RunOutcome {
    let m = x0.len();
    let floor = 0.5 * ZERO_FLOOR * ZERO_FLOOR;
    let mut x = x0;
    let mut g = vec![0.0; m];
    let mut f = obj.eval(&x, &mut g);
    tangent(&mut g, &x);
    let mut eta = 1.0;
    let (mut z, mut xn, mut gn) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for _ in 0..budget.max_steps {
        if f <= floor {
            break;
        }
        let mut accepted = None;
        let mut step = eta;
        for _ in 0..60 {
            for i in 0..m {
                z[i] = x[i] - step * g[i];
            }
            if project_sphere(c, &z, &mut xn) {
                let moved: f64 = xn.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                if moved == 0.0 {
                    break;
                }
                let fnew = obj.eval(&xn, &mut gn);
                if fnew <= f - 1e-4 * moved / step {
                    accepted = Some(fnew);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(fnew) = accepted else {
            break;
        };
        tangent(&mut gn, &xn);
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..m {
            let s = xn[i] - x[i];
            ss += s * s;
            sy += s * (gn[i] - g[i]);
        }
        eta = if sy > 0.0 {
            (ss / sy).clamp(1e-8, 1e8)
        } else {
            (2.0 * step).min(1e8)
        };
        let decrease = f - fnew;
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        f = fnew;
        if decrease <= budget.rel_tol * (f + decrease) {
            break;
        }
    }
    RunOutcome { f, x }
}

fn tangent(g: &mut [f64], x: &[f64]) {
    let r = dot(g, x);
    g.iter_mut().zip(x).for_each(|(gi, xi)| *gi -= r * xi);
}

fn solve(
    a: &RealMatrix,
    c: &Cone,
    d: &Cone,
    budget: &SolverBudget,
) -> Result<SresResult, RenegarError> {
    if budget.restarts == 0 {
        return Err(RenegarError::InvalidParameter(
            "restarts must be positive".into(),
        ));
    }
    let mut rng = budget.stream.rng();
    let mut obj = Objective::new(a, d);
    let mut candidates: Vec<(f64, Vec<f64>)> =
        Vec::with_capacity(budget.search_samples.max(budget.restarts));
    for _ in 0..budget.search_samples.max(budget.restarts) {
        let x = random_point(c, &mut rng).ok_or(RenegarError::ZeroCone)?;
        candidates.push((obj.value(&x), x));
    }
    candidates.sort_by(|p, q| p.0.total_cmp(&q.0));
    candidates.truncate(budget.restarts);

    let floor = 0.5 * ZERO_FLOOR * ZERO_FLOOR;
    let mut finals: Vec<f64> = Vec::with_capacity(budget.restarts);
    let mut best: Option<RunOutcome> = None;
    for (_, x0) in candidates {
        let run = descend(&mut obj, c, x0, budget);
        finals.push((2.0 * run.f).sqrt());
        let hit_floor = run.f <= floor;
        if best.as_ref().is_none_or(|b| run.f < b.f) {
            best = Some(run);
        }
        if hit_floor {
            break;
        }
    }
    let best = best.expect("at least one restart");
    let value = (2.0 * best.f).sqrt();
    let agreeing = finals
        .iter()
        .filter(|&&v| v <= value + budget.agreement_tol)
        .count();
    let quality = if best.f <= floor || agreeing >= 2 {
        SresQuality::Confirmed
    } else {
        SresQuality::Stalled
    };
    Ok(SresResult {
        value,
        quality,
        agreeing,
        argmin: Some(best.x),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Primal,
    Dual,
    IllPosed,
    /// Neither side vanishes; only possible when both cones are the full
    /// space of one common dimension and `A` is invertible.
    Neither,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Primal => "primal",
            Verdict::Dual => "dual",
            Verdict::IllPosed => "ill-posed",
            Verdict::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub tag: Verdict,
    /// `sigma_{C,D}(A)`, the distance of `A` to the primal feasible set.
    pub sres_primal: f64,
    /// `sigma_{D,C}(-A^T)`, the distance to the dual feasible set.
    pub sres_dual: f64,
    pub tolerance: f64,
    pub quality: SresQuality,
}

/// Both restricted singular values, with the dual solved on its own sub-stream.
fn both_sides(
    problem: &BiconicProblem,
    budget: &SolverBudget,
) -> Result<(SresResult, SresResult), RenegarError> {
    let primal = restricted_singular_value(&problem.a, &problem.c, &problem.d, budget)?;
    let dual_budget = budget.with_stream(budget.stream.substream(1));
    let dual = if problem.d.is_zero() {
        // the dual domain is {0}: (D') has no nonzero candidate
        SresResult {
            value: f64::INFINITY,
            quality: SresQuality::Exact,
            agreeing: 0,
            argmin: None,
        }
    } else {
        let dp = problem.dual();
        restricted_singular_value(&dp.a, &dp.c, &dp.d, &dual_budget)?
    };
    Ok((primal, dual))
}

pub fn classify_feasibility(
    problem: &BiconicProblem,
    tol: f64,
    budget: &SolverBudget,
) -> Result<FeasibilityVerdict, RenegarError> {
    if !(tol > 0.0) {
        return Err(RenegarError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let (p, d) = both_sides(problem, budget)?;
    let tag = match (p.value <= tol, d.value <= tol) {
        (true, true) => Verdict::IllPosed,
        (true, false) => Verdict::Primal,
        (false, true) => Verdict::Dual,
        (false, false) => Verdict::Neither,
    };
    Ok(FeasibilityVerdict {
        tag,
        sres_primal: p.value,
        sres_dual: d.value,
        tolerance: tol,
        quality: p.quality.worst(d.quality),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenegarValue {
    /// `+inf` on ill-posed inputs.
    pub value: f64,
    pub norm: f64,
    pub verdict: FeasibilityVerdict,
}

/// `R_{C,D}(A)` with the spectral norm; a side whose restricted singular
/// value is below `1e-8 ||A||` contributes `+inf`.
pub fn renegar_condition(
    problem: &BiconicProblem,
    budget: &SolverBudget,
) -> Result<RenegarValue, RenegarError> {
    let norm_a = spectral_norm(&problem.a)?;
    if norm_a == 0.0 {
        return Err(RenegarError::ZeroMatrix);
    }
    let verdict = classify_feasibility(problem, ZERO_TOL * norm_a, budget)?;
    let ratio = |s: f64| {
        if s <= verdict.tolerance {
            f64::INFINITY
        } else {
            norm_a / s
        }
    };
    Ok(RenegarValue {
        value: ratio(verdict.sres_primal).min(ratio(verdict.sres_dual)),
        norm: norm_a,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GordonBounds {
    /// `w(C) + w(D) + lambda`, exceeded by the restricted norm with probability at most `prob_bound`.
    pub upper_threshold: f64,
    /// `w(D) - w(C) - lambda`, undercut by `sigma_{C,D}(G)` with probability at most `prob_bound`.
    pub lower_threshold: f64,
    /// `exp(-lambda^2 / 2)`.
    pub prob_bound: f64,
    pub w_c: f64,
    pub w_d: f64,
}

/// Where Gaussian widths come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WidthSource {
    Supplied {
        w_c: f64,
        w_d: f64,
    },
    /// Closed forms where known, otherwise Monte Carlo with this many trials.
    Estimate {
        trials: usize,
        stream: RngStream,
    },
}

fn widths(c: &Cone, d: &Cone, source: &WidthSource) -> Result<(f64, f64), RenegarError> {
    match *source {
        WidthSource::Supplied { w_c, w_d } => Ok((w_c, w_d)),
        WidthSource::Estimate { trials, stream } => Ok((
            width(c, trials, stream.substream(0))?,
            width(d, trials, stream.substream(1))?,
        )),
    }
}

pub fn gordon_bounds(
    c: &Cone,
    d: &Cone,
    lambda: f64,
    source: &WidthSource,
) -> Result<GordonBounds, RenegarError> {
    if !(lambda >= 0.0) {
        return Err(RenegarError::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let (w_c, w_d) = widths(c, d, source)?;
    Ok(GordonBounds {
        upper_threshold: w_c + w_d + lambda,
        lower_threshold: w_d - w_c - lambda,
        prob_bound: (-lambda * lambda / 2.0).exp(),
        w_c,
        w_d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyboundWidths {
    pub w_c: f64,
    pub w_d: f64,
    /// `w(R^m)`.
    pub w_rm: f64,
    /// `w(R^n)`.
    pub w_rn: f64,
}

impl KeyboundWidths {
    /// Widths for `C ⊆ R^m`, `D ⊆ R^n`; the full-space widths are exact.
    pub fn for_cones(c: &Cone, d: &Cone, source: &WidthSource) -> Result<Self, RenegarError> {
        let (w_c, w_d) = widths(c, d, source)?;
        Ok(Self {
            w_c,
            w_d,
            w_rm: chi_mean(c.ambient_dim()),
            w_rn: chi_mean(d.ambient_dim()),
        })
    }
}

/// Conditional-expectation bound for `R_{C,D}(G)` outside an exceptional
/// set of probability below `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyboundParams {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub t_epsilon: f64,
    /// `∫_{b/a}^{(a+b)/(2a)} exp(-(a s - b)^2 / 2) / (1 - s)^2 ds`.
    pub integral: f64,
    pub integral_error: f64,
    pub rhs: f64,
}

/// The integral term of the bound, by adaptive quadrature to `1e-10`.
pub fn keybound_integral(a: f64, b: f64) -> Result<(f64, f64), RenegarError> {
    let lo = b / a;
    let hi = (a + b) / (2.0 * a);
    let opts = QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-13,
        max_intervals: 20_000,
    };
    let points = peak_breaks(lo, lo, hi, 1.0 / a);
    let r = integrate_with_breaks(keybound_integrand(a, b), &points, opts)?;
    Ok((r.value, r.abs_error))
}

/// `s -> exp(-(a s - b)^2 / 2) / (1 - s)^2`.
pub fn keybound_integrand(a: f64, b: f64) -> impl Fn(f64) -> f64 {
    move |s: f64| (-(a * s - b).powi(2) / 2.0).exp() / (1.0 - s).powi(2)
}

/// `a = ½(w_Rm + w_Rn + w_D - w_C)`, `b = ½(w_Rm + w_Rn - (w_D - w_C))`,
/// `epsilon = 2 exp(-(a-b)^2 / 8)`, `t_epsilon = 2(a+b)/(a-b) + 1` and
/// `rhs = ((w_Rm + w_Rn)/(w_D - w_C) + 4 I) / (1 - epsilon)`.
/// Requires `w_D - w_C > 2 sqrt 2`.
pub fn keybound(w: &KeyboundWidths) -> Result<KeyboundParams, RenegarError> {
    let gap = w.w_d - w.w_c;
    if !(gap > 2.0 * std::f64::consts::SQRT_2) {
        return Err(RenegarError::PreconditionViolated(format!(
            "w(D) - w(C) = {gap} must exceed 2 sqrt 2"
        )));
    }
    let sum = w.w_rm + w.w_rn;
    let a = 0.5 * (sum + gap);
    let b = 0.5 * (sum - gap);
    let epsilon = 2.0 * (-(gap * gap) / 8.0).exp();
    let t_epsilon = 2.0 * sum / gap + 1.0;
    let (integral, integral_error) = keybound_integral(a, b)?;
    let rhs = (sum / gap + 4.0 * integral) / (1.0 - epsilon);
    Ok(KeyboundParams {
        a,
        b,
        epsilon,
        t_epsilon,
        integral,
        integral_error,
        rhs,
    })
}

fn check_unit_interval(name: &str, v: f64) -> Result<(), RenegarError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(RenegarError::InvalidParameter(format!(
            "{name} = {v} must lie in (0, 1]"
        )))
    }
}

/// `(1 + gamma) / (beta - alpha gamma)`, the limit of the bound along a
/// regime with `delta(C)/m -> alpha^2`, `delta(D)/n -> beta^2`, `m/n -> gamma^2`.
pub fn asymptotic_limit(alpha: f64, beta: f64, gamma: f64) -> Result<f64, RenegarError> {
    check_unit_interval("alpha", alpha)?;
    check_unit_interval("beta", beta)?;
    check_unit_interval("gamma", gamma)?;
    if beta <= alpha * gamma {
        return Err(RenegarError::PreconditionViolated(format!(
            "beta = {beta} must exceed alpha gamma = {}",
            alpha * gamma
        )));
    }
    Ok((1.0 + gamma) / (beta - alpha * gamma))
}

/// Limiting form of the integral term at scale `n`:
/// `∫_0^u (1-s)^{-2} exp(-n (c s - d)^2 / 8) ds` with
/// `c = gamma + 1 + beta - alpha gamma`, `d = gamma + 1 - (beta - alpha gamma)`,
/// `u = (gamma + 1) / c`. Decays like `n^{-1/2}`.
pub fn laplace_integral(n: f64, alpha: f64, beta: f64, gamma: f64) -> Result<f64, RenegarError> {
    asymptotic_limit(alpha, beta, gamma)?;
    let gap = beta - alpha * gamma;
    let c = gamma + 1.0 + gap;
    let d = gamma + 1.0 - gap;
    let u = (gamma + 1.0) / c;
    let peak = (d / c).clamp(0.0, u);
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-11,
        max_intervals: 20_000,
    };
    let f = |s: f64| (-n * (c * s - d).powi(2) / 8.0).exp() / (1.0 - s).powi(2);
    let points = peak_breaks(0.0, peak, u, 2.0 / (c * n.sqrt()));
    Ok(integrate_with_breaks(f, &points, opts)?.value)
}

/// Breakpoints on `[lo, hi]` at `peak ± width 4^j`, so that the first
/// Kronrod nodes resolve a peak much narrower than the interval.
fn peak_breaks(lo: f64, peak: f64, hi: f64, width: f64) -> Vec<f64> {
    let mut points = vec![lo, peak, hi];
    let mut step = width;
    while peak - step > lo || peak + step < hi {
        points.extend(
            [peak - step, peak + step]
                .into_iter()
                .filter(|&x| x > lo && x < hi),
        );
        step *= 4.0;
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeFamily {
    Full,
    Orthant,
    SecondOrder,
}

impl ConeFamily {
    pub fn cone(self, dim: usize) -> Cone {
        match self {
            ConeFamily::Full => Cone::FullSpace(dim),
            ConeFamily::Orthant => Cone::Orthant(dim),
            ConeFamily::SecondOrder => Cone::SecondOrder(dim),
        }
    }

    /// `sqrt(delta / dim)`: 1 for the full space, `1/sqrt 2` for self-dual cones.
    pub fn root_ratio(self) -> f64 {
        match self {
            ConeFamily::Full => 1.0,
            ConeFamily::Orthant | ConeFamily::SecondOrder => std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    /// Family of a cone spec, if it is one of the supported families.
    pub fn of(cone: &Cone) -> Option<Self> {
        match cone {
            Cone::FullSpace(_) => Some(ConeFamily::Full),
            Cone::Orthant(_) => Some(ConeFamily::Orthant),
            Cone::SecondOrder(_) => Some(ConeFamily::SecondOrder),
            _ => None,
        }
    }
}

/// Cone families along the schedule `n_k = base_n 2^k`, `m_k = round(gamma^2 n_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRegime {
    pub c_family: ConeFamily,
    pub d_family: ConeFamily,
    pub gamma: f64,
    pub base_n: usize,
}

impl AsymptoticRegime {
    pub fn alpha(&self) -> f64 {
        self.c_family.root_ratio()
    }

    pub fn beta(&self) -> f64 {
        self.d_family.root_ratio()
    }

    pub fn dims(&self, k: u32) -> (usize, usize) {
        let n = self.base_n << k;
        let m = ((self.gamma * self.gamma * n as f64).round() as usize).max(1);
        (m, n)
    }

    pub fn cones(&self, k: u32) -> (Cone, Cone) {
        let (m, n) = self.dims(k);
        let c = self.c_family.cone(m);
        let d = self.d_family.cone(n);
        (c, d)
    }

    pub fn limit(&self) -> Result<f64, RenegarError> {
        asymptotic_limit(self.alpha(), self.beta(), self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenegarTrial {
    pub trial: usize,
    pub m: usize,
    pub n: usize,
    pub value: f64,
    pub sres_primal: f64,
    pub sres_dual: f64,
    pub verdict: Verdict,
    pub quality: SresQuality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenegarExperiment {
    pub m: usize,
    pub n: usize,
    pub weak: WeakExpectationReport,
    pub widths: KeyboundWidths,
    /// `None` when `w(D) - w(C) <= 2 sqrt 2`.
    pub keybound: Option<KeyboundParams>,
    /// Limit along the matching regime, when both cones belong to a family
    /// and the limit exists.
    pub limit: Option<f64>,
    pub stalled: usize,
    pub trials: Vec<RenegarTrial>,
}

/// Number of Monte Carlo trials used for widths without a closed form.
pub const WIDTH_TRIALS: usize = 100_000;

/// Samples `trials` Gaussian `n_k x m_k` matrices, computes `R_{C,D}` for
/// each and truncates the upper `epsilon` tail. Trial `i` uses sub-stream `i`.
pub fn renegar_weak_experiment(
    regime: &AsymptoticRegime,
    k: u32,
    epsilon: f64,
    trials: usize,
    budget: &SolverBudget,
    stream: RngStream,
) -> Result<RenegarExperiment, RenegarError> {
    let limit = regime.limit()?;
    let (c, d) = regime.cones(k);
    let mut e = cone_pair_experiment(&c, &d, epsilon, trials, budget, stream)?;
    e.limit = Some(limit);
    Ok(e)
}

/// Limit for a cone pair whose families are known, with `gamma = sqrt(m/n)`.
pub fn pair_limit(c: &Cone, d: &Cone) -> Option<f64> {
    let (fc, fd) = (ConeFamily::of(c)?, ConeFamily::of(d)?);
    let gamma = (c.ambient_dim() as f64 / d.ambient_dim() as f64).sqrt();
    asymptotic_limit(fc.root_ratio(), fd.root_ratio(), gamma).ok()
}

/// Same experiment for an explicit cone pair `C ⊆ R^m`, `D ⊆ R^n`.
pub fn cone_pair_experiment(
    c: &Cone,
    d: &Cone,
    epsilon: f64,
    trials: usize,
    budget: &SolverBudget,
    stream: RngStream,
) -> Result<RenegarExperiment, RenegarError> {
    if trials == 0 {
        return Err(RenegarError::InvalidParameter(
            "trials must be positive".into(),
        ));
    }
    let (m, n) = (c.ambient_dim(), d.ambient_dim());
    let records: Vec<RenegarTrial> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<RenegarTrial, RenegarError> {
            let sub = stream.substream(i as u64);
            let a = gaussian_matrix(&mut sub.rng(), n, m)?;
            let problem = BiconicProblem::new(a, c.clone(), d.clone())?;
            let r = renegar_condition(&problem, &budget.with_stream(sub.substream(0)))?;
            Ok(RenegarTrial {
                trial: i,
                m,
                n,
                value: r.value,
                sres_primal: r.verdict.sres_primal,
                sres_dual: r.verdict.sres_dual,
                verdict: r.verdict.tag,
                quality: r.verdict.quality,
            })
        })
        .collect::<Result<_, _>>()?;
    let values: Vec<f64> = records.iter().map(|r| r.value).collect();
    let weak = weak_expectation(&values, epsilon)?;
    let source = WidthSource::Estimate {
        trials: WIDTH_TRIALS,
        stream: stream.substream(u64::MAX),
    };
    let widths = KeyboundWidths::for_cones(c, d, &source)?;
    let keybound = match keybound(&widths) {
        Ok(p) => Some(p),
        Err(RenegarError::PreconditionViolated(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(RenegarExperiment {
        m,
        n,
        weak,
        widths,
        keybound,
        limit: pair_limit(c, d),
        stalled: records
            .iter()
            .filter(|r| r.quality == SresQuality::Stalled)
            .count(),
        trials: records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> SolverBudget {
        SolverBudget::default().with_restarts(8)
    }

    #[test]
    fn full_cones_give_smallest_singular_value() {
        let a = RealMatrix::from_diag(&[1.0, 2.0]);
        let r = restricted_singular_value(&a, &Cone::FullSpace(2), &Cone::FullSpace(2), &budget())
            .unwrap();
        assert_eq!(r.quality, SresQuality::Exact);
        assert!((r.value - 1.0).abs() < 1e-15);
        let p = BiconicProblem::new(a, Cone::FullSpace(2), Cone::FullSpace(2)).unwrap();
        let v = renegar_condition(&p, &budget()).unwrap();
        assert!((v.value - 2.0).abs() < 1e-14);
        assert_eq!(v.verdict.tag, Verdict::Neither);
    }

    #[test]
    fn orthant_examples() {
        let id = RealMatrix::identity(2);
        let r = restricted_singular_value(&id, &Cone::Orthant(2), &Cone::FullSpace(2), &budget())
            .unwrap();
        assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
        let minus = id.scaled(-1.0);
        let r = restricted_singular_value(&minus, &Cone::Orthant(2), &Cone::Orthant(2), &budget())
            .unwrap();
        assert!(r.value < 1e-12);

        let p = BiconicProblem::new(minus, Cone::Orthant(2), Cone::Orthant(2)).unwrap();
        assert_eq!(
            classify_feasibility(&p, 1e-8, &budget()).unwrap().tag,
            Verdict::Primal
        );
        let p = BiconicProblem::new(id, Cone::Orthant(2), Cone::Orthant(2)).unwrap();
        assert_eq!(
            classify_feasibility(&p, 1e-8, &budget()).unwrap().tag,
            Verdict::Dual
        );
    }

    #[test]
    fn ill_posed_is_infinite() {
        // x = e_1 in C maps to 0, and y = e_1 in D has -A^T y = 0
        let a = RealMatrix::from_diag(&[0.0, 1.0]);
        let p = BiconicProblem::new(a, Cone::Orthant(2), Cone::Orthant(2)).unwrap();
        let v = renegar_condition(&p, &budget()).unwrap();
        assert_eq!(v.verdict.tag, Verdict::IllPosed);
        assert_eq!(v.value, f64::INFINITY);
    }

    #[test]
    fn errors() {
        let a = RealMatrix::identity(2);
        assert!(matches!(
            BiconicProblem::new(a.clone(), Cone::Orthant(3), Cone::FullSpace(2)),
            Err(RenegarError::ShapeMismatch { .. })
        ));
        let zero = Cone::FullSpace(2).polar();
        assert_eq!(
            restricted_singular_value(&a, &zero, &Cone::FullSpace(2), &budget()),
            Err(RenegarError::ZeroCone)
        );
        let p = BiconicProblem::new(RealMatrix::zeros(2, 2), Cone::Orthant(2), Cone::Orthant(2))
            .unwrap();
        assert_eq!(
            renegar_condition(&p, &budget()),
            Err(RenegarError::ZeroMatrix)
        );
    }

    #[test]
    fn gordon_formulas() {
        let s = WidthSource::Supplied { w_c: 1.0, w_d: 5.0 };
        let g = gordon_bounds(&Cone::Orthant(2), &Cone::FullSpace(30), 0.0, &s).unwrap();
        assert_eq!(g.prob_bound, 1.0);
        let g = gordon_bounds(&Cone::Orthant(2), &Cone::FullSpace(30), 2.0, &s).unwrap();
        assert!((g.prob_bound - (-2f64).exp()).abs() < 1e-15);
        assert_eq!((g.upper_threshold, g.lower_threshold), (8.0, 2.0));
        let est = WidthSource::Estimate {
            trials: 100,
            stream: RngStream::new(0, 0),
        };
        let g = gordon_bounds(
            &Cone::Subspace(crate::cones::Subspace::coordinate(0, 3)),
            &Cone::FullSpace(9),
            1.0,
            &est,
        )
        .unwrap();
        assert_eq!(g.w_c, 0.0);
        assert!((g.lower_threshold - (chi_mean(9) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn keybound_example() {
        let w = KeyboundWidths {
            w_c: 0.0,
            w_d: 10.0,
            w_rm: 8.0,
            w_rn: 12.0,
        };
        let k = keybound(&w).unwrap();
        assert_eq!((k.a, k.b), (15.0, 5.0));
        assert!((k.epsilon - 2.0 * (-12.5f64).exp()).abs() < 1e-18);
        assert!((k.t_epsilon - 5.0).abs() < 1e-15);
        assert!(k.rhs > 2.0);
        let bad = KeyboundWidths {
            w_c: 0.0,
            w_d: 2.0,
            w_rm: 8.0,
            w_rn: 12.0,
        };
        assert!(matches!(
            keybound(&bad),
            Err(RenegarError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn limits() {
        assert!((asymptotic_limit(1.0, 1.0, 0.5).unwrap() - 3.0).abs() < 1e-15);
        let v = asymptotic_limit(std::f64::consts::FRAC_1_SQRT_2, 1.0, 0.5).unwrap();
        assert!((v - 1.5 / (1.0 - 1.0 / (2.0 * 2f64.sqrt()))).abs() < 1e-14);
        assert!((v - 2.32037).abs() < 1e-5);
        assert!(asymptotic_limit(1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn regime_schedule() {
        let r = AsymptoticRegime {
            c_family: ConeFamily::Orthant,
            d_family: ConeFamily::Full,
            gamma: 0.5,
            base_n: 200,
        };
        assert_eq!(r.dims(0), (50, 200));
        assert_eq!(r.dims(2), (200, 800));
    }
}
