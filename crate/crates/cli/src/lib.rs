//! Experiment runner: parses configuration, dispatches to the library
//! experiments and writes seeded, reproducible records.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod record;
pub mod report;

use std::path::PathBuf;

use cli::{Cli, Command};
use config::{check_min, resolve_seed, ConfigError, ConfigFile, Resolver, SEED_ENV};
use experiments::{Provenance, Rows, RunError, RunOutput};
use record::{emit, timestamp_now, Format, RECORD_HEADER, TAIL_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STRICT: i32 = 3;

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Conic(_) => "conic",
        Command::Tails(_) => "tails",
        Command::Power(_) => "power",
        Command::Renegar(_) => "renegar",
        Command::Cones(_) => "cones",
        Command::Bounds(_) => "bounds",
        Command::Report(_) => "report",
    }
}

/// Runs one invocation and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    if let Command::Report(args) = &cli.command {
        return match report::aggregate(&args.paths) {
            Ok(groups) => {
                print!("{}", report::render(&groups));
                EXIT_OK
            }
            Err(e @ record::RecordError::SchemaMismatch { .. }) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_IO
            }
        };
    }
    match execute(&cli) {
        Ok((out, strict)) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if strict && !out.warnings.is_empty() {
                EXIT_STRICT
            } else {
                EXIT_OK
            }
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e}");
            EXIT_IO
        }
    }
}

enum Failure {
    Config(ConfigError),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => Failure::Config(c),
            RunError::Compute(m) => Failure::Other(m),
        }
    }
}

fn execute(cli: &Cli) -> Result<(RunOutput, bool), Failure> {
    let name = subcommand_name(&cli.command);
    let common = &cli.common;
    let file = match &common.config {
        Some(p) => ConfigFile::load(p, name)?,
        None => ConfigFile::default(),
    };
    let res = Resolver::new(file);
    let seed = resolve_seed(std::env::var(SEED_ENV).ok(), common.seed, &res)?;
    let out = match &common.out {
        Some(p) => Some(p.clone()),
        None => Some(PathBuf::from(res.quiet("out", None, String::new())?))
            .filter(|p| !p.as_os_str().is_empty()),
    };
    let default_format = out
        .as_deref()
        .map_or(Format::Csv, Format::from_path)
        .to_string();
    let format_str = res.quiet("format", common.format.clone(), default_format)?;
    let format: Format = format_str
        .parse()
        .map_err(|e: String| ConfigError::invalid("format", &format_str, e))?;
    if let Some(jobs) = res.clone().optional("jobs", common.jobs)? {
        check_min("jobs", jobs, 1)?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let strict = common.strict || res.quiet("strict", None, false)?;
    let p = Provenance {
        seed,
        timestamp: timestamp_now(),
    };
    let output = match &cli.command {
        Command::Conic(a) => experiments::conic(a, common, res, &p)?,
        Command::Tails(a) => experiments::tails(a, common, res, &p)?,
        Command::Power(a) => experiments::power(a, common, res, &p)?,
        Command::Renegar(a) => experiments::renegar(a, common, res, &p)?,
        Command::Cones(a) => experiments::cones(a, common, res, &p)?,
        Command::Bounds(a) => experiments::bounds(a, common, res, &p)?,
        Command::Report(_) => unreachable!("handled in run"),
    };
    let written = match &output.rows {
        Rows::Records(r) => emit(r, &RECORD_HEADER, format, out.as_deref()),
        Rows::Tails(r) => emit(r, &TAIL_HEADER, format, out.as_deref()),
    };
    written.map_err(|e| Failure::Other(e.to_string()))?;
    Ok((output, strict))
}
