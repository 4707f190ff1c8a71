//! Merges record files: groups runs by experiment and parameters, pools the
//! headline estimate over seeds and sets it beside its bound and limit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use wacc_core::stats::{pool, MeanSe};

use crate::record::{read_records, Record, RecordError, RowKind};

/// Metric names of the headline estimate, its reference bound and limit.
#[derive(Debug, Clone, Copy)]
pub struct Headline {
    pub mean: Option<&'static str>,
    pub se: Option<&'static str>,
    pub count: Option<&'static str>,
    pub bound: Option<&'static str>,
    pub limit: Option<&'static str>,
}

pub fn headline(experiment: &str) -> Headline {
    let h = |mean, se, count, bound, limit| Headline {
        mean,
        se,
        count,
        bound,
        limit,
    };
    match experiment {
        "conic" => h(
            Some("conditional_mean"),
            Some("conditional_se"),
            Some("conditional_count"),
            Some("theorem_bound"),
            None,
        ),
        "power" => h(
            Some("conditional_mean_rho"),
            Some("conditional_se"),
            Some("conditional_count"),
            None,
            None,
        ),
        "renegar" => h(
            Some("conditional_mean"),
            Some("conditional_se"),
            Some("conditional_count"),
            Some("keybound_rhs"),
            Some("limit"),
        ),
        "cones" => h(
            Some("gaussian_width"),
            Some("width_se"),
            Some("trials"),
            None,
            Some("closed_form_width"),
        ),
        "bounds" => h(None, None, None, Some("value"), None),
        _ => h(None, None, None, None, None),
    }
}

/// Summary metrics of one run (one file, one seed).
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub source: PathBuf,
    pub seed: u64,
    pub metrics: BTreeMap<String, String>,
}

impl RunSummary {
    fn number(&self, metric: Option<&str>) -> Option<f64> {
        self.metrics.get(metric?)?.parse().ok()
    }
}

/// All runs of one experiment with one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub experiment: String,
    pub params: String,
    pub runs: Vec<RunSummary>,
    /// Count-weighted pooled estimate.
    pub estimate: Option<MeanSe>,
    /// Average over runs; exact when the value does not depend on the seed.
    pub bound: Option<f64>,
    pub limit: Option<f64>,
}

fn average(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.collect::<Option<_>>()?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Groups summary rows by `(experiment, params)` in order of first appearance.
pub fn group_records(files: &[(PathBuf, Vec<Record>)]) -> Vec<Group> {
    let mut groups: Vec<Group> = Vec::new();
    for (path, records) in files {
        for r in records.iter().filter(|r| r.row == RowKind::Summary) {
            let gi = match groups
                .iter()
                .position(|g| g.experiment == r.experiment && g.params == r.params)
            {
                Some(i) => i,
                None => {
                    groups.push(Group {
                        experiment: r.experiment.clone(),
                        params: r.params.clone(),
                        runs: Vec::new(),
                        estimate: None,
                        bound: None,
                        limit: None,
                    });
                    groups.len() - 1
                }
            };
            let runs = &mut groups[gi].runs;
            let ri = match runs
                .iter()
                .position(|s| &s.source == path && s.seed == r.seed)
            {
                Some(i) => i,
                None => {
                    runs.push(RunSummary {
                        source: path.clone(),
                        seed: r.seed,
                        metrics: BTreeMap::new(),
                    });
                    runs.len() - 1
                }
            };
            runs[ri].metrics.insert(r.metric.clone(), r.value.clone());
        }
    }
    for g in &mut groups {
        let h = headline(&g.experiment);
        let estimates: Option<Vec<MeanSe>> = g
            .runs
            .iter()
            .map(|r| {
                Some(MeanSe {
                    mean: r.number(h.mean)?,
                    se: r.number(h.se)?,
                    count: r.number(h.count)? as usize,
                })
            })
            .collect();
        g.estimate = estimates.map(|e| pool(&e));
        g.bound = average(g.runs.iter().map(|r| r.number(h.bound)));
        g.limit = average(g.runs.iter().map(|r| r.number(h.limit)));
    }
    groups
}

/// Reads and groups record files; any file with a foreign header fails.
pub fn aggregate(paths: &[PathBuf]) -> Result<Vec<Group>, RecordError> {
    let files = paths
        .iter()
        .map(|p| Ok((p.clone(), read_records(p)?)))
        .collect::<Result<Vec<_>, RecordError>>()?;
    Ok(group_records(&files))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

/// Text table with one section per experiment.
pub fn render(groups: &[Group]) -> String {
    let mut out = String::new();
    let mut order: Vec<&str> = Vec::new();
    for g in groups {
        if !order.contains(&g.experiment.as_str()) {
            order.push(&g.experiment);
        }
    }
    for exp in order {
        let _ = writeln!(out, "== {exp} ==");
        let _ = writeln!(
            out,
            "{:>5} {:>9} {:>14} {:>12} {:>14} {:>14}  params",
            "runs", "count", "estimate", "se", "bound", "limit"
        );
        for g in groups.iter().filter(|g| g.experiment == exp) {
            let (mean, se, count) = match g.estimate {
                Some(e) => (Some(e.mean), Some(e.se), e.count.to_string()),
                None => (None, None, "-".to_string()),
            };
            let _ = writeln!(
                out,
                "{:>5} {:>9} {:>14} {:>12} {:>14} {:>14}  {}",
                g.runs.len(),
                count,
                cell(mean),
                cell(se),
                cell(g.bound),
                cell(g.limit),
                g.params
            );
        }
        out.push('\n');
    }
    out
}
