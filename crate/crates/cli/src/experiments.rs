//! Subcommand drivers: resolve parameters, validate them, run the library
//! experiment and flatten the outcome into records.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;
use wacc_core::cones::{cone_geometry, Cone};
use wacc_core::power::{gue_weak_experiment, GueExperimentConfig};
use wacc_core::renegar::{
    asymptotic_limit, cone_pair_experiment, keybound, pair_limit, KeyboundWidths, RenegarError,
    SolverBudget, SresQuality, Verdict, WidthSource,
};
use wacc_core::sampling::RngStream;
use wacc_core::stats::top_fraction_share;
use wacc_core::weak::{
    bcl_tail_bound, conic_cap_experiment, log_grid, probexp_bound, CapExperiment,
    ConicConditionSetup,
};

use crate::cli::{BoundsArgs, CapArgs, Common, ConesArgs, PowerArgs, RenegarArgs};
use crate::config::{check_min, check_range, ConfigError, Resolver};
use crate::record::{fmt_num, Record, RecordSink, TailRow, VERSION};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Compute(String),
}

fn compute(e: impl std::fmt::Display) -> RunError {
    RunError::Compute(e.to_string())
}

/// Rows produced by one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum Rows {
    Records(Vec<Record>),
    Tails(Vec<TailRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Rows,
    /// Solver-quality warnings; escalated to exit status 3 under `--strict`.
    pub warnings: Vec<String>,
}

/// Seed and timestamp shared by every row of a run.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub seed: u64,
    pub timestamp: String,
}

fn trials_epsilon(
    res: &mut Resolver,
    common: &Common,
    trials: usize,
    epsilon: f64,
    min_trials: usize,
) -> Result<(usize, f64), ConfigError> {
    let t = check_min(
        "trials",
        res.get("trials", common.trials, trials)?,
        min_trials,
    )?;
    let e = check_range(
        "epsilon",
        res.get("epsilon", common.epsilon, epsilon)?,
        0.0,
        1.0,
        false,
        true,
    )?;
    Ok((t, e))
}

fn parse_cone(name: &str, spec: &str) -> Result<Cone, ConfigError> {
    spec.parse()
        .map_err(|e: wacc_core::cones::ConeError| ConfigError::invalid(name, spec, e.to_string()))
}

struct CapRun {
    setup: ConicConditionSetup,
    experiment: CapExperiment,
}

fn run_cap(
    args: &CapArgs,
    common: &Common,
    res: &mut Resolver,
    seed: u64,
) -> Result<CapRun, RunError> {
    let kind = res.get("setup", args.setup.clone(), "hyperplane".to_string())?;
    let sigma_flag = args.sigma;
    let setup = match kind.as_str() {
        "hyperplane" => {
            let n = check_min("n", res.get("n", args.n, 3)?, 1)?;
            let sigma = check_range(
                "sigma",
                res.get("sigma", sigma_flag, 1.0)?,
                0.0,
                1.0,
                true,
                false,
            )?;
            ConicConditionSetup::hyperplane(n, sigma)
        }
        "singular" => {
            let k = check_min("k", res.get("k", args.k, 3)?, 2)?;
            let sigma = check_range(
                "sigma",
                res.get("sigma", sigma_flag, 1.0)?,
                0.0,
                1.0,
                true,
                false,
            )?;
            ConicConditionSetup::singular_matrices(k, sigma)
        }
        other => {
            return Err(
                ConfigError::invalid("setup", other, "expected hyperplane or singular").into(),
            )
        }
    };
    let (trials, epsilon) = trials_epsilon(res, common, 100_000, 0.05, 100)?;
    let t_min = check_range(
        "t_min",
        res.get("t-min", args.t_min, 1.0)?,
        0.0,
        f64::MAX,
        true,
        false,
    )?;
    let t_max = check_range(
        "t_max",
        res.get("t-max", args.t_max, 1e4)?,
        t_min,
        f64::MAX,
        false,
        false,
    )?;
    let points = check_min("points", res.get("points", args.points, 25)?, 1)?;
    let grid = log_grid(t_min, t_max, points);
    let experiment = conic_cap_experiment(&setup, trials, epsilon, &grid, RngStream::new(seed, 0))
        .map_err(compute)?;
    Ok(CapRun { setup, experiment })
}

pub fn conic(
    args: &CapArgs,
    common: &Common,
    mut res: Resolver,
    p: &Provenance,
) -> Result<RunOutput, RunError> {
    let CapRun {
        setup,
        experiment: e,
    } = run_cap(args, common, &mut res, p.seed)?;
    let mut s = RecordSink::new("conic", p.seed, res.params(), p.timestamp.clone());
    let w = &e.weak;
    s.summary("conditional_mean", w.conditional_mean);
    s.summary("conditional_se", w.conditional_se);
    s.summary_count("conditional_count", w.sample_count - w.exceptional_count);
    s.summary("raw_mean", w.raw_mean);
    s.summary("threshold", w.threshold);
    s.summary_count("exceptional_count", w.exceptional_count);
    s.summary_count("sample_count", w.sample_count);
    s.summary("top5_share", top_fraction_share(&e.samples, 0.05));
    s.summary("tail_constant", setup.tail_constant());
    s.summary("theorem_bound", e.theorem_bound);
    s.summary("t_epsilon", e.t_epsilon);
    for (i, tp) in e.tail.iter().enumerate() {
        s.tail(i, "t", fmt_num(tp.t));
        s.tail(i, "empirical_tail", fmt_num(tp.empirical));
        s.tail(i, "empirical_se", fmt_num(tp.se));
        s.tail(i, "bcl_bound", fmt_num(tp.bcl_bound));
        s.tail(i, "valid", tp.valid.to_string());
    }
    Ok(RunOutput {
        rows: Rows::Records(s.records),
        warnings: Vec::new(),
    })
}

pub fn tails(
    args: &CapArgs,
    common: &Common,
    mut res: Resolver,
    p: &Provenance,
) -> Result<RunOutput, RunError> {
    let CapRun { experiment: e, .. } = run_cap(args, common, &mut res, p.seed)?;
    let params = res.params();
    let rows = e
        .tail
        .iter()
        .map(|tp| TailRow {
            t: fmt_num(tp.t),
            empirical_tail: fmt_num(tp.empirical),
            bcl_bound: fmt_num(tp.bcl_bound),
            valid: tp.valid,
            seed: p.seed,
            params: params.clone(),
            version: VERSION.to_string(),
            timestamp: p.timestamp.clone(),
        })
        .collect();
    Ok(RunOutput {
        rows: Rows::Tails(rows),
        warnings: Vec::new(),
    })
}

pub fn power(
    args: &PowerArgs,
    common: &Common,
    mut res: Resolver,
    p: &Provenance,
) -> Result<RunOutput, RunError> {
    let n = check_min("n", res.get("n", args.n, 20)?, 2)?;
    let alpha = check_range(
        "alpha",
        res.get("alpha", args.alpha, 0.3)?,
        0.0,
        FRAC_PI_2,
        true,
        true,
    )?;
    let (trials, epsilon) = trials_epsilon(&mut res, common, 500, 0.05, 1)?;
    let starts = check_min("starts", res.get("starts", args.starts, 32)?, 1)?;
    let max_iter = check_min("max_iter", res.get("max-iter", args.max_iter, 100_000)?, 1)?;
    let cfg = GueExperimentConfig {
        n,
        alpha,
        epsilon,
        trials,
        max_iter,
        starts,
    };
    let r = gue_weak_experiment(&cfg, RngStream::new(p.seed, 0)).map_err(compute)?;
    let mut s = RecordSink::new("power", p.seed, res.params(), p.timestamp.clone());
    s.summary("conditional_mean_rho", r.conditional_mean_rho);
    s.summary("conditional_se", r.conditional_se);
    s.summary_count("conditional_count", r.trials - r.exceptional_count);
    s.summary("raw_mean_rho", r.raw_mean_rho);
    s.summary("threshold", r.threshold);
    s.summary_count("exceptional_count", r.exceptional_count);
    s.summary_count("nonconverged_runs", r.nonconverged_runs);
    s.summary("top5_share", r.top5_share);
    for (i, &v) in r.samples.iter().enumerate() {
        s.trial(i, "rho", v);
    }
    let mut warnings = Vec::new();
    if r.nonconverged_runs > 0 {
        warnings.push(format!(
            "{} power-iteration runs hit max_iter = {max_iter}",
            r.nonconverged_runs
        ));
    }
    Ok(RunOutput {
        rows: Rows::Records(s.records),
        warnings,
    })
}

pub fn renegar(
    args: &RenegarArgs,
    common: &Common,
    mut res: Resolver,
    p: &Provenance,
) -> Result<RunOutput, RunError> {
    let c_spec = res.get("cone-c", args.cone_c.clone(), "orthant:50".to_string())?;
    let d_spec = res.get("cone-d", args.cone_d.clone(), "full:200".to_string())?;
    let (c, d) = (
        parse_cone("cone_c", &c_spec)?,
        parse_cone("cone_d", &d_spec)?,
    );
    let (trials, epsilon) = trials_epsilon(&mut res, common, 200, 0.01, 1)?;
    let restarts = check_min(
        "restarts",
        res.get("restarts", args.restarts, SolverBudget::default().restarts)?,
        1,
    )?;
    let budget = SolverBudget::default().with_restarts(restarts);
    let e = cone_pair_experiment(&c, &d, epsilon, trials, &budget, RngStream::new(p.seed, 0))
        .map_err(compute)?;
    let mut s = RecordSink::new("renegar", p.seed, res.params(), p.timestamp.clone());
    let w = &e.weak;
    s.summary_count("m", e.m);
    s.summary_count("n", e.n);
    s.summary("conditional_mean", w.conditional_mean);
    s.summary("conditional_se", w.conditional_se);
    s.summary_count("conditional_count", w.sample_count - w.exceptional_count);
    s.summary("raw_mean", w.raw_mean);
    s.summary("threshold", w.threshold);
    s.summary_count("exceptional_count", w.exceptional_count);
    s.summary("w_c", e.widths.w_c);
    s.summary("w_d", e.widths.w_d);
    s.summary("w_rm", e.widths.w_rm);
    s.summary("w_rn", e.widths.w_rn);
    match &e.keybound {
        Some(k) => s.summary("keybound_rhs", k.rhs),
        None => s.summary_label("keybound_rhs", "n/a"),
    }
    match e.limit {
        Some(l) => s.summary("limit", l),
        None => s.summary_label("limit", "n/a"),
    }
    for v in [
        Verdict::Primal,
        Verdict::Dual,
        Verdict::IllPosed,
        Verdict::Neither,
    ] {
        let count = e.trials.iter().filter(|t| t.verdict == v).count();
        s.summary_count(&format!("verdict_{}", v.label().replace('-', "_")), count);
    }
    s.summary_count("stalled", e.stalled);
    for t in &e.trials {
        s.trial(t.trial, "value", t.value);
        s.trial(t.trial, "sres_primal", t.sres_primal);
        s.trial(t.trial, "sres_dual", t.sres_dual);
        s.trial_label(t.trial, "verdict", t.verdict.label());
        s.trial_label(t.trial, "quality", t.quality.label());
    }
    let mut warnings = Vec::new();
    if e.stalled > 0 {
        let ids: Vec<String> = e
            .trials
            .iter()
            .filter(|t| t.quality == SresQuality::Stalled)
            .map(|t| t.trial.to_string())
            .collect();
        warnings.push(format!(
            "solver restarts disagreed in {} trials: {}",
            e.stalled,
            ids.join(",")
        ));
    }
    Ok(RunOutput {
        rows: Rows::Records(s.records),
        warnings,
    })
}

pub fn cones(
    args: &ConesArgs,
    common: &Common,
    mut res: Resolver,
    p: &Provenance,
) -> Result<RunOutput, RunError> {
    let spec = res.get("cone", args.cone.clone(), "soc:10".to_string())?;
    let cone = parse_cone("cone", &spec)?;
    let trials = check_min("trials", res.get("trials", common.trials, 100_000)?, 2)?;
    let g = cone_geometry(&cone, trials, RngStream::new(p.seed, 0)).map_err(compute)?;
    let mut s = RecordSink::new("cones", p.seed, res.params(), p.timestamp.clone());
    s.summary_count("ambient_dim", cone.ambient_dim());
    s.summary("statistical_dimension", g.statistical_dimension);
    s.summary("dimension_se", g.dimension_se);
    s.summary("gaussian_width", g.gaussian_width);
    s.summary("width_se", g.width_se);
    s.summary_count("trials", g.trials);
    match cone.closed_form_dimension() {
        Some(v) => s.summary("closed_form_dimension", v),
        None => s.summary_label("closed_form_dimension", "n/a"),
    }
    match cone.closed_form_width() {
        Some(v) => s.summary("closed_form_width", v),
        None => s.summary_label("closed_form_width", "n/a"),
    }
    Ok(RunOutput {
        rows: Rows::Records(s.records),
        warnings: Vec::new(),
    })
}

fn required<T>(name: &str, v: Option<T>, kind: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::invalid(name, "<missing>", format!("required by kind {kind}")))
}

/// Cone pair when both specs are given, `None` when neither is.
fn cone_pair(res: &mut Resolver, args: &BoundsArgs) -> Result<Option<(Cone, Cone)>, ConfigError> {
    let c = res.optional("cone-c", args.cone_c.clone())?;
    let d = res.optional("cone-d", args.cone_d.clone())?;
    match (c, d) {
        (Some(c), Some(d)) => Ok(Some((parse_cone("cone_c", &c)?, parse_cone("cone_d", &d)?))),
        (None, None) => Ok(None),
        _ => Err(ConfigError::invalid(
            "cone_c/cone_d",
            "<one missing>",
            "give both cones or neither",
        )),
    }
}

pub fn bounds(
    args: &BoundsArgs,
    common: &Common,
    mut res: Resolver,
    p: &Provenance,
) -> Result<RunOutput, RunError> {
    let kind = required("kind", res.optional("kind", args.kind.clone())?, "bounds")?;
    let mut metrics: Vec<(&str, f64)> = Vec::new();
    let mut labels: Vec<(&str, String)> = Vec::new();
    match kind.as_str() {
        "bcl" => {
            let d = check_min("d", res.get("d", args.d, 1)?, 1)?;
            let n = check_min("n", res.get("n", args.n, 3)?, 1)?;
            let sigma = check_range(
                "sigma",
                res.get("sigma", args.sigma, 1.0)?,
                0.0,
                1.0,
                true,
                false,
            )?;
            let t = check_range(
                "t",
                res.get("t", args.t, 100.0)?,
                0.0,
                f64::MAX,
                true,
                false,
            )?;
            let b = bcl_tail_bound(d, n, sigma, t);
            metrics.push(("value", b.bound));
            metrics.push((
                "validity_start",
                (1.0 + 2.0 * f64::from(d)) * (f64::from(n) - 1.0) / sigma,
            ));
            labels.push(("valid", b.valid.to_string()));
        }
        "probexp" => {
            let a = res.get("a", args.a, 1.0)?;
            let t = res.get("t", args.t, 100.0)?;
            let v = probexp_bound(a, t)
                .map_err(|e| ConfigError::invalid("a, t", format!("{a}, {t}"), e.to_string()))?;
            metrics.push(("value", v));
        }
        "keybound" => {
            let widths = match cone_pair(&mut res, args)? {
                Some((c, d)) => {
                    let trials =
                        check_min("trials", res.get("trials", common.trials, 100_000)?, 2)?;
                    let source = WidthSource::Estimate {
                        trials,
                        stream: RngStream::new(p.seed, 0),
                    };
                    KeyboundWidths::for_cones(&c, &d, &source).map_err(compute)?
                }
                None => KeyboundWidths {
                    w_c: required("w_c", res.optional("w-c", args.w_c)?, "keybound")?,
                    w_d: required("w_d", res.optional("w-d", args.w_d)?, "keybound")?,
                    w_rm: required("w_rm", res.optional("w-rm", args.w_rm)?, "keybound")?,
                    w_rn: required("w_rn", res.optional("w-rn", args.w_rn)?, "keybound")?,
                },
            };
            let k = keybound(&widths).map_err(|e| match e {
                RenegarError::PreconditionViolated(m) | RenegarError::InvalidParameter(m) => {
                    RunError::Config(ConfigError::invalid("widths", format!("{widths:?}"), m))
                }
                other => compute(other),
            })?;
            metrics.extend([
                ("value", k.rhs),
                ("a", k.a),
                ("b", k.b),
                ("epsilon", k.epsilon),
                ("t_epsilon", k.t_epsilon),
                ("integral", k.integral),
                ("integral_error", k.integral_error),
                ("w_c", widths.w_c),
                ("w_d", widths.w_d),
                ("w_rm", widths.w_rm),
                ("w_rn", widths.w_rn),
            ]);
        }
        "limit" => {
            let v = match cone_pair(&mut res, args)? {
                Some((c, d)) => pair_limit(&c, &d).ok_or_else(|| {
                    ConfigError::invalid(
                        "cone_c/cone_d",
                        format!("{c}/{d}"),
                        "limit needs full, orthant or soc cones with a finite limit",
                    )
                })?,
                None => {
                    let alpha = required("alpha", res.optional("alpha", args.alpha)?, "limit")?;
                    let beta = required("beta", res.optional("beta", args.beta)?, "limit")?;
                    let gamma = required("gamma", res.optional("gamma", args.gamma)?, "limit")?;
                    asymptotic_limit(alpha, beta, gamma).map_err(|e| {
                        ConfigError::invalid(
                            "alpha, beta, gamma",
                            format!("{alpha}, {beta}, {gamma}"),
                            e.to_string(),
                        )
                    })?
                }
            };
            metrics.push(("value", v));
        }
        other => {
            return Err(ConfigError::invalid(
                "kind",
                other,
                "expected bcl, probexp, keybound or limit",
            )
            .into())
        }
    }
    let mut s = RecordSink::new("bounds", p.seed, res.params(), p.timestamp.clone());
    for (m, v) in metrics {
        s.summary(m, v);
    }
    for (m, v) in labels {
        s.summary_label(m, &v);
    }
    Ok(RunOutput {
        rows: Rows::Records(s.records),
        warnings: Vec::new(),
    })
}
