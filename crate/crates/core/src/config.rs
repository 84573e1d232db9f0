//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are checked
//! strictly against the set accepted by the selected mode; every missing
//! required key is reported at once.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::branching::BranchConfig;
use crate::dissociation::{RealtimeConfig, Statistics, DEFAULT_ERROR_CEILING};
use crate::hubbard::HubbardRunConfig;
use crate::model::HubbardParams;
use crate::sde::{Scheme, DEFAULT_MIDPOINT_ITERATIONS};
use crate::stats::DEFAULT_BATCHES;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },

    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },

    #[error("unknown key(s) for mode {mode}: {}", .keys.join(", "))]
    UnknownKeys { mode: Mode, keys: Vec<String> },

    #[error("missing required key(s) for mode {mode}: {}", .keys.join(", "))]
    MissingKeys { mode: Mode, keys: Vec<String> },

    #[error("key `{key}`: cannot parse {value:?} as {expected}")]
    Parse { key: String, value: String, expected: &'static str },

    #[error("config declares mode {declared} but was run as {requested}")]
    ModeMismatch { declared: Mode, requested: Mode },

    #[error("unknown mode {0:?} (expected hubbard, dissociation, ed or kernel-check)")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Hubbard,
    Dissociation,
    Ed,
    KernelCheck,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Hubbard => "hubbard",
            Mode::Dissociation => "dissociation",
            Mode::Ed => "ed",
            Mode::KernelCheck => "kernel-check",
        }
    }

    fn required(&self) -> &'static [&'static str] {
        match self {
            Mode::Hubbard => &["lx", "ly", "t", "u", "mu", "tau_max", "dtau", "trajectories", "seed"],
            Mode::Dissociation => &["statistics", "n_mean", "time_max", "dt", "trajectories", "seed"],
            Mode::Ed => &["lx", "ly", "t", "u", "mu", "tau_max", "dtau"],
            Mode::KernelCheck => &[],
        }
    }

    fn optional(&self) -> &'static [&'static str] {
        match self {
            Mode::Hubbard => &[
                "mode",
                "output",
                "periodic",
                "branch_interval",
                "branch_target",
                "batches",
                "record_every",
                "midpoint_iterations",
                "scheme",
            ],
            Mode::Dissociation => {
                &["mode", "output", "batches", "record_every", "midpoint_iterations", "scheme", "error_ceiling"]
            }
            Mode::Ed => &["mode", "output", "periodic", "record_every"],
            Mode::KernelCheck => &["mode", "output", "seed", "states"],
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim() {
            "hubbard" => Ok(Mode::Hubbard),
            "dissociation" => Ok(Mode::Dissociation),
            "ed" => Ok(Mode::Ed),
            "kernel-check" | "kernel_check" => Ok(Mode::KernelCheck),
            other => Err(ConfigError::UnknownMode(other.to_string())),
        }
    }
}

/// Raw key/value pairs in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = split_pair(line).ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.into() })?;
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: i + 1, key: key.into() });
            }
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> crate::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?)?)
    }

    /// Applies a `key=value` override, replacing any existing value.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (key, value) = split_pair(pair).ok_or_else(|| ConfigError::Syntax { line: 0, text: pair.into() })?;
        self.set(key, value);
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Resolves the entries into a typed job for `mode`.
    pub fn resolve(&self, mode: Mode) -> Result<Resolved, ConfigError> {
        if let Some(declared) = self.get("mode") {
            let declared: Mode = declared.parse()?;
            if declared != mode {
                return Err(ConfigError::ModeMismatch { declared, requested: mode });
            }
        }
        let unknown: Vec<String> = self
            .entries
            .keys()
            .filter(|k| !mode.required().contains(&k.as_str()) && !mode.optional().contains(&k.as_str()))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys { mode, keys: unknown });
        }
        let missing: Vec<String> =
            mode.required().iter().filter(|k| !self.entries.contains_key(**k)).map(|k| k.to_string()).collect();
        if !missing.is_empty() {
            return Err(ConfigError::MissingKeys { mode, keys: missing });
        }

        let mut r = Reader { config: self, resolved: BTreeMap::new() };
        r.resolved.insert("mode".into(), mode.name().into());
        let job = match mode {
            Mode::Hubbard => {
                let params = r.hubbard_params()?;
                let trajectories: usize = r.req("trajectories")?;
                let seed: u64 = r.req("seed")?;
                let mut run = HubbardRunConfig::new(trajectories, r.req("dtau")?, r.req("tau_max")?, seed);
                run.batches = r.opt("batches", DEFAULT_BATCHES)?;
                run.record_every = r.opt("record_every", 1)?;
                run.midpoint_iterations = r.opt("midpoint_iterations", DEFAULT_MIDPOINT_ITERATIONS)?;
                run.scheme = r.opt_with("scheme", Scheme::StratonovichMidpoint, Scheme::name)?;
                let interval: usize = r.opt("branch_interval", 0)?;
                let target: usize = r.opt("branch_target", trajectories)?;
                if interval > 0 {
                    run.branching = Some(BranchConfig { interval, target_population: target, seed });
                }
                Job::Hubbard(HubbardJob { params, run })
            }
            Mode::Dissociation => {
                let statistics = r.req_with("statistics", Statistics::name)?;
                let n_mean = r.req("n_mean")?;
                let mut run = RealtimeConfig::new(r.req("trajectories")?, r.req("dt")?, r.req("time_max")?, r.req("seed")?);
                run.batches = r.opt("batches", DEFAULT_BATCHES)?;
                run.record_every = r.opt("record_every", 1)?;
                run.midpoint_iterations = r.opt("midpoint_iterations", DEFAULT_MIDPOINT_ITERATIONS)?;
                run.scheme = r.opt_with("scheme", Scheme::StratonovichMidpoint, Scheme::name)?;
                run.error_ceiling = r.opt("error_ceiling", DEFAULT_ERROR_CEILING)?;
                Job::Dissociation(DissociationJob { statistics, n_mean, run })
            }
            Mode::Ed => {
                let params = r.hubbard_params()?;
                let tau_max: f64 = r.req("tau_max")?;
                let dtau: f64 = r.req("dtau")?;
                let record_every: usize = r.opt("record_every", 1)?;
                let steps = (tau_max / dtau).round().max(0.0) as usize;
                let every = record_every.max(1);
                let mut tau_grid: Vec<f64> = (0..=steps).step_by(every).map(|k| k as f64 * dtau).collect();
                if steps % every != 0 {
                    tau_grid.push(steps as f64 * dtau);
                }
                Job::Ed(EdJob { params, tau_grid })
            }
            Mode::KernelCheck => Job::KernelCheck(KernelCheckJob { seed: r.opt("seed", 0)?, states: r.opt("states", 50)? }),
        };
        let output = self.get("output").map(PathBuf::from);
        if let Some(o) = self.get("output") {
            r.resolved.insert("output".into(), o.into());
        }
        Ok(Resolved { job, output, manifest: r.resolved.into_iter().collect() })
    }
}

fn split_pair(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() || k.contains(char::is_whitespace) {
        return None;
    }
    Some((k, v))
}

struct Reader<'a> {
    config: &'a Config,
    resolved: BTreeMap<String, String>,
}

impl Reader<'_> {
    fn parse<T: FromStr>(&self, key: &str, value: &str) -> Result<T, ConfigError> {
        value.parse().map_err(|_| ConfigError::Parse {
            key: key.into(),
            value: value.into(),
            expected: std::any::type_name::<T>().rsplit("::").next().unwrap_or("value"),
        })
    }

    fn req<T: FromStr + ToString>(&mut self, key: &str) -> Result<T, ConfigError> {
        let raw = self.config.get(key).expect("required keys checked before reading");
        let v: T = self.parse(key, raw)?;
        self.resolved.insert(key.into(), v.to_string());
        Ok(v)
    }

    fn opt<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        let v = match self.config.get(key) {
            Some(raw) => self.parse(key, raw)?,
            None => default,
        };
        self.resolved.insert(key.into(), v.to_string());
        Ok(v)
    }

    fn req_with<T: FromStr>(&mut self, key: &str, show: fn(&T) -> &'static str) -> Result<T, ConfigError> {
        let raw = self.config.get(key).expect("required keys checked before reading");
        let v: T = self.parse(key, raw)?;
        self.resolved.insert(key.into(), show(&v).into());
        Ok(v)
    }

    fn opt_with<T: FromStr>(&mut self, key: &str, default: T, show: fn(&T) -> &'static str) -> Result<T, ConfigError> {
        let v = match self.config.get(key) {
            Some(raw) => self.parse(key, raw)?,
            None => default,
        };
        self.resolved.insert(key.into(), show(&v).into());
        Ok(v)
    }

    fn hubbard_params(&mut self) -> Result<HubbardParams, ConfigError> {
        Ok(HubbardParams {
            t: self.req("t")?,
            u: self.req("u")?,
            mu: self.req("mu")?,
            lx: self.req("lx")?,
            ly: self.req("ly")?,
            periodic: self.opt("periodic", true)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HubbardJob {
    pub params: HubbardParams,
    pub run: HubbardRunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissociationJob {
    pub statistics: Statistics,
    pub n_mean: f64,
    pub run: RealtimeConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdJob {
    pub params: HubbardParams,
    pub tau_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheckJob {
    pub seed: u64,
    pub states: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Hubbard(HubbardJob),
    Dissociation(DissociationJob),
    Ed(EdJob),
    KernelCheck(KernelCheckJob),
}

/// A typed job plus every setting it uses, defaults included.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub job: Job,
    pub output: Option<PathBuf>,
    pub manifest: Vec<(String, String)>,
}
