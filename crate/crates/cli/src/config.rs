//! Parameter resolution: command-line flags, then the TOML config file, then
//! built-in defaults. Every resolved value is echoed into the `params` column.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const SEED_ENV: &str = "WACC_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config file {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("config key '{key}' has the wrong type, expected {expected}")]
    Type { key: String, expected: &'static str },
    #[error("{name} = {value}: {reason}")]
    Invalid {
        name: String,
        value: String,
        reason: String,
    },
    #[error("{SEED_ENV}='{0}' is not an unsigned 64-bit integer")]
    SeedEnv(String),
}

impl ConfigError {
    pub fn invalid(name: &str, value: impl Display, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            name: name.to_string(),
            value: value.to_string(),
            reason: reason.into(),
        }
    }
}

/// A value that can come from a flag, a TOML entry or a default.
pub trait Param: Sized + Clone + Display {
    const KIND: &'static str;
    fn from_toml(v: &toml::Value) -> Option<Self>;
}

impl Param for f64 {
    const KIND: &'static str = "a number";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
    }
}

macro_rules! int_param {
    ($($t:ty),*) => {$(
        impl Param for $t {
            const KIND: &'static str = "a non-negative integer";
            fn from_toml(v: &toml::Value) -> Option<Self> {
                v.as_integer().and_then(|i| <$t>::try_from(i).ok())
            }
        }
    )*};
}
int_param!(u32, u64, usize);

impl Param for String {
    const KIND: &'static str = "a string";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_str().map(str::to_string)
    }
}

impl Param for bool {
    const KIND: &'static str = "a boolean";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_bool()
    }
}

/// Config file contents: top-level keys apply to every subcommand and a
/// table named after the subcommand overrides them.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    top: toml::Table,
    section: toml::Table,
}

impl ConfigFile {
    pub fn load(path: &Path, subcommand: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, subcommand).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    }

    pub fn parse(text: &str, subcommand: &str) -> Result<Self, toml::de::Error> {
        let mut top: toml::Table = text.parse()?;
        let section = match top.remove(subcommand) {
            Some(toml::Value::Table(t)) => t,
            Some(other) => {
                top.insert(subcommand.to_string(), other);
                toml::Table::new()
            }
            None => toml::Table::new(),
        };
        Ok(Self { top, section })
    }

    fn lookup(&self, name: &str) -> Option<(&toml::Value, String)> {
        let alt = name.replace('-', "_");
        [&self.section, &self.top].into_iter().find_map(|t| {
            t.get(name)
                .map(|v| (v, name.to_string()))
                .or_else(|| t.get(&alt).map(|v| (v, alt.clone())))
        })
    }
}

/// Resolves parameters and records the effective values in order.
#[derive(Debug, Clone, Default)]
pub struct Resolver {
    file: ConfigFile,
    echoed: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(file: ConfigFile) -> Self {
        Self {
            file,
            echoed: Vec::new(),
        }
    }

    /// Value without echoing it into the parameter list.
    pub fn quiet<T: Param>(
        &self,
        name: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, ConfigError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.lookup(name) {
            Some((v, key)) => T::from_toml(v).ok_or(ConfigError::Type {
                key,
                expected: T::KIND,
            }),
            None => Ok(default),
        }
    }

    pub fn get<T: Param>(
        &mut self,
        name: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, ConfigError> {
        let v = self.quiet(name, flag, default)?;
        self.echo(name, &v);
        Ok(v)
    }

    /// Like `get` without a default; absent values are not echoed.
    pub fn optional<T: Param>(
        &mut self,
        name: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.lookup(name) {
                Some((v, key)) => Some(T::from_toml(v).ok_or(ConfigError::Type {
                    key,
                    expected: T::KIND,
                })?),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.echo(name, v);
        }
        Ok(v)
    }

    pub fn echo(&mut self, name: &str, value: &impl Display) {
        self.echoed
            .push((name.replace('-', "_"), value.to_string()));
    }

    /// `k=v;k=v` in resolution order.
    pub fn params(&self) -> String {
        self.echoed
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// `WACC_SEED` when set, else the flag, else the config file, else 0.
pub fn resolve_seed(
    env: Option<String>,
    flag: Option<u64>,
    res: &Resolver,
) -> Result<u64, ConfigError> {
    if let Some(s) = env {
        return s.trim().parse().map_err(|_| ConfigError::SeedEnv(s));
    }
    res.quiet("seed", flag, 0)
}

pub fn check_range(
    name: &str,
    v: f64,
    lo: f64,
    hi: f64,
    lo_open: bool,
    hi_open: bool,
) -> Result<f64, ConfigError> {
    let above = if lo_open { v > lo } else { v >= lo };
    let below = if hi_open { v < hi } else { v <= hi };
    if above && below && v.is_finite() {
        Ok(v)
    } else {
        let (l, r) = (
            if lo_open { '(' } else { '[' },
            if hi_open { ')' } else { ']' },
        );
        Err(ConfigError::invalid(
            name,
            v,
            format!("must lie in {l}{lo}, {hi}{r}"),
        ))
    }
}

pub fn check_min<T: PartialOrd + Display + Copy>(
    name: &str,
    v: T,
    min: T,
) -> Result<T, ConfigError> {
    if v >= min {
        Ok(v)
    } else {
        Err(ConfigError::invalid(
            name,
            v,
            format!("must be at least {min}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_sections_beat_top_level_beat_defaults() {
        let file = ConfigFile::parse(
            "trials = 10\nepsilon = 0.2\n[power]\ntrials = 20\nmax_iter = 5\n",
            "power",
        )
        .unwrap();
        let mut r = Resolver::new(file);
        assert_eq!(r.get("trials", Some(30usize), 1).unwrap(), 30);
        assert_eq!(r.get("trials", None, 1usize).unwrap(), 20);
        assert_eq!(r.get("epsilon", None, 0.05).unwrap(), 0.2);
        assert_eq!(r.get("max-iter", None, 7usize).unwrap(), 5);
        assert_eq!(r.get("starts", None, 32usize).unwrap(), 32);
        assert_eq!(
            r.params(),
            "trials=30;trials=20;epsilon=0.2;max_iter=5;starts=32"
        );
    }

    #[test]
    fn seed_precedence() {
        let r = Resolver::new(ConfigFile::parse("seed = 5", "x").unwrap());
        assert_eq!(resolve_seed(Some("9".into()), Some(7), &r).unwrap(), 9);
        assert_eq!(resolve_seed(None, Some(7), &r).unwrap(), 7);
        assert_eq!(resolve_seed(None, None, &r).unwrap(), 5);
        assert!(resolve_seed(Some("x".into()), None, &r).is_err());
    }

    #[test]
    fn wrong_types_are_reported() {
        let mut r = Resolver::new(ConfigFile::parse("trials = \"many\"", "x").unwrap());
        assert!(matches!(
            r.get("trials", None, 1usize),
            Err(ConfigError::Type { .. })
        ));
        assert!(check_range("epsilon", 1.0, 0.0, 1.0, false, true).is_err());
        assert!(check_range("epsilon", 0.0, 0.0, 1.0, false, true).is_ok());
    }
}
