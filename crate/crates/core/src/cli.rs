//! Command-line front end: one subcommand per pipeline, each reading a flat
//! config file and writing a CSV plus a manifest next to it.
//!
//! Exit codes: 0 success, 1 I/O or numerical failure, 2 configuration
//! error, 3 ensemble extinction, 4 failed oracle check.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Config, Job, Mode, Resolved};
use crate::dissociation::run_realtime;
use crate::error::{Error, Result};
use crate::hubbard::run_imaginary_time;
use crate::oracle::{ed_hubbard, kernel_battery, KernelCheckRow};
use crate::output;

/// Worker-thread count for trajectory fan-out. Results do not depend on it.
pub const THREADS_ENV: &str = "GQMC_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EXTINCTION: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "gaussian-qmc", version, about = "Gaussian phase-space Monte Carlo runs from flat config files")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Imaginary-time Hubbard sampler.
    Hubbard(RunArgs),
    /// Real-time molecular dissociation.
    Dissociation(RunArgs),
    /// Exact diagonalization reference table.
    Ed(RunArgs),
    /// Seeded battery of Gaussian-kernel checks.
    KernelCheck(RunArgs),
}

impl Command {
    pub fn mode(&self) -> Mode {
        match self {
            Command::Hubbard(_) => Mode::Hubbard,
            Command::Dissociation(_) => Mode::Dissociation,
            Command::Ed(_) => Mode::Ed,
            Command::KernelCheck(_) => Mode::KernelCheck,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Hubbard(a) | Command::Dissociation(a) | Command::Ed(a) | Command::KernelCheck(a) => a,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override or add a config entry; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// CSV destination; the manifest goes next to it with extension `.manifest`.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Master seed, same as `--set seed=N`.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    /// False when an oracle check failed; files are still written.
    pub passed: bool,
    pub summary: String,
}

/// Merges the config file, `--set` overrides and flags, then resolves.
pub fn load(mode: Mode, args: &RunArgs) -> Result<Resolved> {
    let mut config = match &args.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for pair in &args.set {
        config.apply_override(pair)?;
    }
    if let Some(seed) = args.seed {
        config.set("seed", &seed.to_string());
    }
    if let Some(out) = &args.output {
        config.set("output", &out.to_string_lossy());
    }
    Ok(config.resolve(mode)?)
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs a resolved job and writes its files.
pub fn execute(resolved: &Resolved) -> Result<Outcome> {
    let mode = match resolved.job {
        Job::Hubbard(_) => Mode::Hubbard,
        Job::Dissociation(_) => Mode::Dissociation,
        Job::Ed(_) => Mode::Ed,
        Job::KernelCheck(_) => Mode::KernelCheck,
    };
    let csv = resolved.output.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", mode.name())));
    let mut manifest = resolved.manifest.clone();
    let mut passed = true;
    let summary;
    {
        let mut w = create(&csv)?;
        match &resolved.job {
            Job::Hubbard(job) => {
                let run = run_imaginary_time(&job.params, &job.run)?;
                output::write_hubbard_csv(&mut w, &run.points)?;
                let d = &run.diagnostics;
                manifest.extend([
                    ("result.weight_checks".into(), d.weight_checks.to_string()),
                    ("result.weight_violations".into(), d.weight_violations.to_string()),
                    ("result.invalid_trajectories".into(), d.invalid_trajectories.to_string()),
                    ("result.branch_events".into(), d.branch_events.len().to_string()),
                    ("result.population_min".into(), d.population_bounds.0.to_string()),
                    ("result.population_max".into(), d.population_bounds.1.to_string()),
                ]);
                summary = format!(
                    "{} grid points, {} weight violations, {} invalid trajectories",
                    run.points.len(),
                    d.weight_violations,
                    d.invalid_trajectories
                );
            }
            Job::Dissociation(job) => {
                let series = run_realtime(job.statistics, job.n_mean, &job.run)?;
                output::write_dissociation_csv(&mut w, &series)?;
                let cut = series.truncated_at.map_or("none".to_string(), output::number);
                manifest.push(("result.truncated_at".into(), cut.clone()));
                summary = format!("{} time points, truncated at {cut}", series.points.len());
            }
            Job::Ed(job) => {
                let points = ed_hubbard(&job.params, &job.params.lattice(), &job.tau_grid)?;
                output::write_reference_table(&mut w, &points)?;
                summary = format!("{} grid points", points.len());
            }
            Job::KernelCheck(job) => {
                let rows = kernel_battery(job.seed, job.states)?;
                output::write_kernel_csv(&mut w, &rows)?;
                passed = rows.iter().all(KernelCheckRow::passes);
                let worst = |f: &dyn Fn(&KernelCheckRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
                let lines = [
                    ("trace", worst(&|r| r.trace_deviation)),
                    ("moments", worst(&|r| r.moment_deviation)),
                    ("weight", worst(&|r| r.identities.map_or(0.0, |d| d.weight))),
                    ("normal", worst(&|r| r.identities.map_or(0.0, |d| d.normal))),
                    ("mixed", worst(&|r| r.identities.map_or(0.0, |d| d.mixed))),
                    ("antinormal", worst(&|r| r.identities.map_or(0.0, |d| d.antinormal))),
                ];
                for (name, v) in lines {
                    manifest.push((format!("result.max_{name}_deviation"), output::number(v)));
                }
                summary = lines.iter().map(|(n, v)| format!("{n} {v:.3e}")).collect::<Vec<_>>().join(", ");
            }
        }
        w.flush()?;
    }
    manifest.push(("result.passed".into(), passed.to_string()));
    let manifest_file = manifest_path(&csv);
    let mut m = create(&manifest_file)?;
    output::write_manifest(&mut m, &manifest)?;
    m.flush()?;
    Ok(Outcome { csv, manifest: manifest_file, passed, summary })
}

/// Worker pool sized from [`THREADS_ENV`], or rayon's default when unset.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::SizeCap(_)
        | Error::DimensionMismatch { .. }
        | Error::UndefinedError { .. } => EXIT_CONFIG,
        Error::Extinction { .. } => EXIT_EXTINCTION,
        _ => EXIT_FAILURE,
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn main_from_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = thread_pool().and_then(|pool| {
        let resolved = load(cli.command.mode(), cli.command.args())?;
        pool.install(|| execute(&resolved))
    });
    match result {
        Ok(outcome) => {
            println!("{}: {}", cli.command.mode(), outcome.summary);
            println!("wrote {} and {}", outcome.csv.display(), outcome.manifest.display());
            if outcome.passed {
                EXIT_OK
            } else {
                eprintln!("error: oracle check failed");
                EXIT_ORACLE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
