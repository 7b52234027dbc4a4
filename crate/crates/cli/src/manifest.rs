//! Run manifests: everything needed to repeat a run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn build_id() -> String {
    match option_env!("STACKDRIVE_BUILD_ID") {
        Some(id) => id.to_string(),
        None => format!("{}-{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A fully resolved invocation; defaults are filled in before it is stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Invocation {
    Unit {
        seed: u64,
    },
    Montecarlo {
        seed: u64,
        runs: usize,
    },
    Section {
        seed: u64,
        runs: usize,
        density: usize,
        mix: String,
        duration: f64,
    },
    Fig14 {
        seed: u64,
        runs: Vec<usize>,
        densities: Vec<usize>,
        mixes: Vec<String>,
        duration: f64,
    },
    ScoreTrace {
        trace: PathBuf,
        trace_sha256: String,
    },
    Compare {
        attentive: PathBuf,
        inattentive: PathBuf,
    },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::Unit { .. } => "unit",
            Invocation::Montecarlo { .. } => "montecarlo",
            Invocation::Section { .. } => "section",
            Invocation::Fig14 { .. } => "fig14",
            Invocation::ScoreTrace { .. } => "score-trace",
            Invocation::Compare { .. } => "compare",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Invocation::Unit { seed }
            | Invocation::Montecarlo { seed, .. }
            | Invocation::Section { seed, .. }
            | Invocation::Fig14 { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// The invocation is flattened, so its seed sits at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub invocation: Invocation,
    /// Path given with `--config`, absent for the shipped fixture.
    pub config_path: Option<PathBuf>,
    /// Exact config text the run used.
    pub config: String,
    pub config_sha256: String,
    pub output_dir: PathBuf,
    pub build_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(
        invocation: Invocation,
        config_path: Option<PathBuf>,
        config: String,
        output_dir: PathBuf,
    ) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            invocation,
            config_path,
            config_sha256: sha256_hex(config.as_bytes()),
            config,
            output_dir,
            build_id: build_id(),
            timestamp,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        fs::write(dir.join(MANIFEST_FILE), text + "\n").map_err(|e| CliError::io(dir, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: bad manifest: {e}", path.display())))?;
        if sha256_hex(m.config.as_bytes()) != m.config_sha256 {
            return Err(CliError::Config(format!(
                "{}: embedded config does not match its hash",
                path.display()
            )));
        }
        Ok(m)
    }
}
