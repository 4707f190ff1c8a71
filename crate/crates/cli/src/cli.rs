//! Command-line surface. Every experiment parameter is optional here so that
//! the config file and the defaults can fill the gaps.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "wacc",
    version,
    about = "Monte Carlo experiments on condition numbers under weak average-case analysis"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Master seed; the WACC_SEED environment variable overrides it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo trials.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Fraction of largest samples discarded before averaging.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// csv or json; inferred from the --out extension when absent.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Worker threads; all logical cores when absent.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Exit with status 3 when a solver reports a quality warning.
    #[arg(long, global = true)]
    pub strict: bool,
    /// TOML file with parameter values; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Truncated mean of a conic condition number over a spherical cap.
    Conic(CapArgs),
    /// Raw tail curve of a conic condition number against the cap tail bound.
    Tails(CapArgs),
    /// Truncated mean of power-iteration step counts on GUE matrices.
    Power(PowerArgs),
    /// Truncated mean of the Renegar condition number of Gaussian matrices.
    Renegar(RenegarArgs),
    /// Statistical dimension and Gaussian width estimates.
    Cones(ConesArgs),
    /// Pure formula evaluation.
    Bounds(BoundsArgs),
    /// Aggregate result files into a comparison table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CapArgs {
    /// hyperplane ({x_1 = 0} in S^n) or singular (singular k x k matrices).
    #[arg(long)]
    pub setup: Option<String>,
    /// Sphere dimension for the hyperplane setup.
    #[arg(long)]
    pub n: Option<u32>,
    /// Matrix size for the singular setup.
    #[arg(long)]
    pub k: Option<usize>,
    /// Cap radius in (0, 1].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Smallest tail threshold.
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Largest tail threshold.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Number of log-spaced thresholds.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PowerArgs {
    /// Matrix size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Target angle in (0, pi/2).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Random starts per matrix.
    #[arg(long)]
    pub starts: Option<usize>,
    /// Iteration cap per start.
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RenegarArgs {
    /// Primal cone C in R^m.
    #[arg(long)]
    pub cone_c: Option<String>,
    /// Dual-side cone D in R^n.
    #[arg(long)]
    pub cone_d: Option<String>,
    /// Solver restarts per restricted singular value.
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConesArgs {
    /// Cone spec: full:m, orthant:m, soc:m, psd:s, subspace:k:m or polar:<spec>.
    #[arg(long)]
    pub cone: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BoundsArgs {
    /// bcl, probexp, keybound or limit.
    #[arg(long)]
    pub kind: Option<String>,
    /// Degree bound (bcl).
    #[arg(long)]
    pub d: Option<u32>,
    /// Sphere dimension (bcl).
    #[arg(long)]
    pub n: Option<u32>,
    /// Cap radius (bcl).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Threshold (bcl, probexp).
    #[arg(long)]
    pub t: Option<f64>,
    /// Tail constant (probexp).
    #[arg(long)]
    pub a: Option<f64>,
    /// Gaussian width of C (keybound).
    #[arg(long)]
    pub w_c: Option<f64>,
    /// Gaussian width of D (keybound).
    #[arg(long)]
    pub w_d: Option<f64>,
    /// Gaussian width of R^m (keybound).
    #[arg(long)]
    pub w_rm: Option<f64>,
    /// Gaussian width of R^n (keybound).
    #[arg(long)]
    pub w_rn: Option<f64>,
    /// Primal cone (keybound, limit); replaces the explicit widths or ratios.
    #[arg(long)]
    pub cone_c: Option<String>,
    /// Dual-side cone (keybound, limit).
    #[arg(long)]
    pub cone_d: Option<String>,
    /// Width ratio of the C family (limit).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Width ratio of the D family (limit).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Aspect ratio sqrt(m/n) (limit).
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Record files written by the experiment subcommands.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
}
