//! Long-format experiment records and the tail-curve schema, in CSV or JSON.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

pub const RECORD_HEADER: [&str; 9] = [
    "experiment",
    "seed",
    "row",
    "trial",
    "params",
    "metric",
    "value",
    "version",
    "timestamp",
];
pub const TAIL_HEADER: [&str; 8] = [
    "t",
    "empirical_tail",
    "bcl_bound",
    "valid",
    "seed",
    "params",
    "version",
    "timestamp",
];

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: schema mismatch, {detail}")]
    SchemaMismatch { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}', expected csv or json")),
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl Format {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Summary,
    Trial,
    Tail,
}

/// One measured quantity of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub experiment: String,
    pub seed: u64,
    pub row: RowKind,
    pub trial: Option<u64>,
    pub params: String,
    pub metric: String,
    /// Numbers with 17 significant digits, categories as labels.
    pub value: String,
    pub version: String,
    pub timestamp: String,
}

impl Record {
    pub fn number(&self) -> Option<f64> {
        self.value.parse().ok()
    }
}

/// One point of a tail curve with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailRow {
    pub t: String,
    pub empirical_tail: String,
    pub bcl_bound: String,
    pub valid: bool,
    pub seed: u64,
    pub params: String,
    pub version: String,
    pub timestamp: String,
}

/// `{:.16e}`, with `inf`, `-inf` and `NaN` spelled so that `f64::from_str` reads them back.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Seconds since the Unix epoch.
pub fn timestamp_now() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
        .to_string()
}

/// Collects the records of one run under a shared provenance block.
#[derive(Debug, Clone)]
pub struct RecordSink {
    pub experiment: String,
    pub seed: u64,
    pub params: String,
    pub timestamp: String,
    pub records: Vec<Record>,
}

impl RecordSink {
    pub fn new(experiment: &str, seed: u64, params: String, timestamp: String) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed,
            params,
            timestamp,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, row: RowKind, trial: Option<u64>, metric: &str, value: String) {
        self.records.push(Record {
            experiment: self.experiment.clone(),
            seed: self.seed,
            row,
            trial,
            params: self.params.clone(),
            metric: metric.to_string(),
            value,
            version: VERSION.to_string(),
            timestamp: self.timestamp.clone(),
        });
    }

    pub fn summary(&mut self, metric: &str, v: f64) {
        self.push(RowKind::Summary, None, metric, fmt_num(v));
    }

    pub fn summary_count(&mut self, metric: &str, v: usize) {
        self.push(RowKind::Summary, None, metric, v.to_string());
    }

    pub fn summary_label(&mut self, metric: &str, v: &str) {
        self.push(RowKind::Summary, None, metric, v.to_string());
    }

    pub fn trial(&mut self, i: usize, metric: &str, v: f64) {
        self.push(RowKind::Trial, Some(i as u64), metric, fmt_num(v));
    }

    pub fn trial_label(&mut self, i: usize, metric: &str, v: &str) {
        self.push(RowKind::Trial, Some(i as u64), metric, v.to_string());
    }

    pub fn tail(&mut self, i: usize, metric: &str, v: String) {
        self.push(RowKind::Tail, Some(i as u64), metric, v);
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RecordError + '_ {
    move |source| RecordError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes rows as CSV with a header, or as a JSON array of objects.
pub fn write_rows<T: Serialize, W: Write>(
    rows: &[T],
    header: &[&str],
    format: Format,
    mut w: W,
) -> Result<(), RecordError> {
    match format {
        Format::Csv => {
            let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            wtr.write_record(header)?;
            for r in rows {
                wtr.serialize(r)?;
            }
            wtr.flush().map_err(csv::Error::from)?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows)?;
            w.write_all(b"\n")
                .map_err(|e| RecordError::Json(serde_json::Error::io(e)))?;
        }
    }
    Ok(())
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit<T: Serialize>(
    rows: &[T],
    header: &[&str],
    format: Format,
    path: Option<&Path>,
) -> Result<(), RecordError> {
    match path {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(io_err(p))?;
            let mut w = std::io::BufWriter::new(f);
            write_rows(rows, header, format, &mut w)?;
            w.flush().map_err(io_err(p))
        }
        None => write_rows(rows, header, format, std::io::stdout().lock()),
    }
}

/// Reads records from a file written by `emit`, checking the schema. The
/// format is detected from the content.
pub fn read_records(path: &Path) -> Result<Vec<Record>, RecordError> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(io_err(path))?;
    parse_records(&text, path)
}

pub fn parse_records(text: &str, path: &Path) -> Result<Vec<Record>, RecordError> {
    let mismatch = |detail: String| RecordError::SchemaMismatch {
        path: path.to_path_buf(),
        detail,
    };
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text)
            .map_err(|e| mismatch(format!("not an array of records: {e}")));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RECORD_HEADER) {
        return Err(mismatch(format!(
            "header is '{}', expected '{}'",
            headers.iter().collect::<Vec<_>>().join(","),
            RECORD_HEADER.join(",")
        )));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| mismatch(format!("row {}: {e}", i + 1))))
        .collect()
}

/// Reads a tail-curve file.
pub fn read_tails(path: &Path) -> Result<Vec<TailRow>, RecordError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mismatch = |detail: String| RecordError::SchemaMismatch {
        path: path.to_path_buf(),
        detail,
    };
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| mismatch(e.to_string()));
    }
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    if rdr.headers()?.iter().ne(TAIL_HEADER) {
        return Err(mismatch("not a tail-curve file".into()));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| mismatch(e.to_string())))
        .collect()
}
