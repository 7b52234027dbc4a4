//! Command-line front end for the stackdrive experiments.

mod commands;
pub mod manifest;
mod output;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use stackdrive::config::{ScenarioConfig, TABLE1_TOML};
use stackdrive::experiments::{ExperimentError, FIG14_MIXES, MIX_NAMES};
use stackdrive::sim_engine::SimError;

pub use manifest::{Invocation, RunManifest, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERDICT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{failed} verdict(s) failed")]
    Verdict { failed: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Verdict { .. } => EXIT_VERDICT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Sim(SimError::Numerical { .. }) => CliError::Numerical(e.to_string()),
            ExperimentError::Sim(SimError::Invalid(m)) => CliError::Config(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        ExperimentError::from(e).into()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stackdrive",
    version,
    about = "Stackelberg lane-change experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Four disposition combinations on the two-vehicle layout.
    Unit {
        #[command(flatten)]
        common: Common,
    },
    /// Collision possibility against random longitudinal placement.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        /// Number of random placements.
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Crash and near-crash statistics on the 200 m section.
    Section {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Vehicles per section.
        #[arg(long, default_value_t = 6)]
        density: usize,
        #[arg(long, default_value = "attentive")]
        mix: String,
        /// Simulated seconds per run.
        #[arg(long, default_value_t = 600.0)]
        duration: f64,
    },
    /// Cumulative collision possibility over densities, mixes and run counts.
    Fig14 {
        #[command(flatten)]
        common: Common,
        /// Run counts; smaller counts reuse the leading seeds.
        #[arg(long, value_delimiter = ',', default_value = "5,50")]
        runs: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "6,8")]
        density: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        mix: Vec<String>,
        #[arg(long, default_value_t = 600.0)]
        duration: f64,
    },
    /// Pairwise collision index and events of a stored trace.
    ScoreTrace {
        /// Trace CSV as written by `unit`.
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Crash-rate comparison of an attentive and an inattentive `section` run.
    Compare {
        /// Output directory (or summary file) of the attentive run.
        #[arg(long)]
        attentive: PathBuf,
        #[arg(long)]
        inattentive: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat a run from its manifest.
    Rerun {
        manifest: PathBuf,
        /// Write here instead of the recorded output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario TOML; the shipped two-vehicle layout when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Config text and its parsed form.
pub struct LoadedConfig {
    pub path: Option<PathBuf>,
    pub text: String,
    pub config: ScenarioConfig,
}

pub fn load_config(path: Option<&Path>) -> Result<LoadedConfig, CliError> {
    let text = match path {
        Some(p) => {
            fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => TABLE1_TOML.to_string(),
    };
    parse_config(path.map(Path::to_path_buf), text)
}

fn parse_config(path: Option<PathBuf>, text: String) -> Result<LoadedConfig, CliError> {
    let config = ScenarioConfig::from_toml_str(&text).map_err(|e| {
        let at = path
            .as_ref()
            .map(|p| format!("{}: ", p.display()))
            .unwrap_or_default();
        CliError::Config(format!("{at}{e}"))
    })?;
    Ok(LoadedConfig { path, text, config })
}

fn check_mix(name: &str) -> Result<(), CliError> {
    if MIX_NAMES.contains(&name) || name == "inattentive" {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "unknown mix {name:?}; expected one of {}",
            MIX_NAMES.join(", ")
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{name} must be positive")))
    }
}

/// Resolve parsed arguments into a manifest-ready invocation.
fn resolve(command: Command) -> Result<(Invocation, Option<PathBuf>, PathBuf), CliError> {
    Ok(match command {
        Command::Unit { common } => {
            let seed = common.seed.unwrap_or(1);
            (Invocation::Unit { seed }, common.config, common.out)
        }
        Command::Montecarlo { common, runs } => {
            if runs == 0 {
                return Err(CliError::Usage("--runs must be at least 1".into()));
            }
            let seed = common.seed.unwrap_or(7);
            (
                Invocation::Montecarlo { seed, runs },
                common.config,
                common.out,
            )
        }
        Command::Section {
            common,
            runs,
            density,
            mix,
            duration,
        } => {
            check_mix(&mix)?;
            positive("duration", duration)?;
            if runs == 0 || density == 0 {
                return Err(CliError::Usage(
                    "--runs and --density must be at least 1".into(),
                ));
            }
            let seed = common.seed.unwrap_or(1000);
            (
                Invocation::Section {
                    seed,
                    runs,
                    density,
                    mix,
                    duration,
                },
                common.config,
                common.out,
            )
        }
        Command::Fig14 {
            common,
            mut runs,
            mut density,
            mix,
            duration,
        } => {
            positive("duration", duration)?;
            let mixes = if mix.is_empty() {
                FIG14_MIXES.iter().map(|m| m.to_string()).collect()
            } else {
                mix
            };
            for m in &mixes {
                check_mix(m)?;
            }
            runs.sort_unstable();
            runs.dedup();
            density.sort_unstable();
            density.dedup();
            if runs.first() == Some(&0)
                || density.first() == Some(&0)
                || runs.is_empty()
                || density.is_empty()
            {
                return Err(CliError::Usage(
                    "--runs and --density need positive values".into(),
                ));
            }
            let seed = common.seed.unwrap_or(1000);
            (
                Invocation::Fig14 {
                    seed,
                    runs,
                    densities: density,
                    mixes,
                    duration,
                },
                common.config,
                common.out,
            )
        }
        Command::ScoreTrace { trace, config, out } => {
            let bytes = fs::read(&trace).map_err(|e| CliError::io(&trace, e))?;
            let trace_sha256 = manifest::sha256_hex(&bytes);
            (
                Invocation::ScoreTrace {
                    trace,
                    trace_sha256,
                },
                config,
                out,
            )
        }
        Command::Compare {
            attentive,
            inattentive,
            out,
        } => (
            Invocation::Compare {
                attentive,
                inattentive,
            },
            None,
            out,
        ),
        Command::Rerun { .. } => unreachable!("rerun is dispatched before resolution"),
    })
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Execute an invocation and write its manifest.
pub fn execute(manifest: &RunManifest, loaded: &LoadedConfig) -> Result<(), CliError> {
    let out = &manifest.output_dir;
    prepare_out(out)?;
    manifest.write(out)?;
    commands::dispatch(&manifest.invocation, &loaded.config, out)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Rerun { manifest, out } => {
            let recorded = RunManifest::read(&manifest)?;
            if recorded.build_id != manifest::build_id() {
                println!(
                    "note: manifest was written by {}, this is {}",
                    recorded.build_id,
                    manifest::build_id()
                );
            }
            let loaded = parse_config(recorded.config_path.clone(), recorded.config.clone())?;
            if let Invocation::ScoreTrace {
                trace,
                trace_sha256,
            } = &recorded.invocation
            {
                let bytes = fs::read(trace).map_err(|e| CliError::io(trace, e))?;
                if &manifest::sha256_hex(&bytes) != trace_sha256 {
                    return Err(CliError::Usage(format!(
                        "{}: trace changed since the recorded run",
                        trace.display()
                    )));
                }
            }
            let dir = out.unwrap_or_else(|| recorded.output_dir.clone());
            let fresh = RunManifest::new(
                recorded.invocation,
                recorded.config_path,
                recorded.config,
                dir,
            );
            execute(&fresh, &loaded)
        }
        command => {
            let (invocation, config_path, out) = resolve(command)?;
            let loaded = load_config(config_path.as_deref())?;
            let manifest =
                RunManifest::new(invocation, loaded.path.clone(), loaded.text.clone(), out);
            execute(&manifest, &loaded)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("STACKDRIVE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "STACKDRIVE_THREADS={value:?} is not a positive integer"
            ))
        })?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("stackdrive: {e}");
            e.exit_code()
        }
    }
}
