//! Experiment runner for `madelung-core`.
//!
//! `run` executes one named experiment from a config file and writes
//!
//! * `summary.json` — every reported number and every check. It is a pure
//!   function of the config file, so two runs with the same config and
//!   seed produce byte-identical summaries;
//! * `manifest.json` — config hash, seed, crate versions, timestamp,
//!   wall-clock time and a SHA-256 for every artifact;
//! * CSV and binary dumps specific to the experiment.
//!
//! The binary maps the outcome onto exit codes: 0 when all checks pass,
//! 2 when a check fails, 1 on any error.

pub mod config;
pub mod criteria;
pub mod error;
pub mod experiments;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{ExperimentConfig, ExperimentKind};
pub use criteria::Check;
pub use error::{CliError, Result};
pub use experiments::{execute, ExperimentOutput};

pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
struct Summary<'a> {
    experiment: &'static str,
    config_sha256: &'a str,
    seed: u64,
    passed: bool,
    checks: &'a [Check],
    results: &'a serde_json::Value,
}

#[derive(Debug, Serialize)]
struct ArtifactRecord {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Versions {
    #[serde(rename = "madelung-core")]
    core: &'static str,
    #[serde(rename = "madelung-cli")]
    cli: &'static str,
}

#[derive(Debug, Serialize)]
struct Manifest {
    experiment: &'static str,
    config_path: Option<PathBuf>,
    config_sha256: String,
    seed: u64,
    versions: Versions,
    timestamp_unix: u64,
    elapsed_seconds: f64,
    threads: usize,
    output_dir: PathBuf,
    artifacts: Vec<ArtifactRecord>,
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses and checks a config without computing anything.
pub fn validate(config_path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(config_path)
}

/// `(name, description)` of every experiment.
pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    ExperimentKind::ALL.iter().map(|k| (k.name(), k.description())).collect()
}

/// Loads `config_path` and runs it.
pub fn run(config_path: &Path) -> Result<RunReport> {
    let cfg = ExperimentConfig::load(config_path)?;
    let bytes = std::fs::read(config_path).map_err(|source| CliError::ConfigFile {
        path: config_path.to_path_buf(),
        source,
    })?;
    run_config(&cfg, &sha256_hex(&bytes), Some(config_path))
}

/// Runs an already validated config; `config_sha256` identifies it in the
/// summary and manifest.
pub fn run_config(cfg: &ExperimentConfig, config_sha256: &str, config_path: Option<&Path>) -> Result<RunReport> {
    let started = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cfg.max_parallelism {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config("max_parallelism", e.to_string()))?;
    let threads = pool.current_num_threads();
    let output = pool.install(|| execute(cfg))?;
    let elapsed = started.elapsed().as_secs_f64();

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.clone(),
        source,
    })?;
    let write = |name: &str, bytes: &[u8]| -> Result<ArtifactRecord> {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Output { path, source })?;
        Ok(ArtifactRecord {
            file: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        })
    };

    let passed = output.passed();
    let summary = Summary {
        experiment: cfg.experiment.name(),
        config_sha256,
        seed: cfg.mc.seed,
        passed,
        checks: &output.checks,
        results: &output.results,
    };
    let mut summary_bytes = serde_json::to_vec_pretty(&summary)?;
    summary_bytes.push(b'\n');
    let mut records = vec![write(SUMMARY_FILE, &summary_bytes)?];
    for a in &output.artifacts {
        records.push(write(&a.name, &a.bytes)?);
    }

    let manifest = Manifest {
        experiment: cfg.experiment.name(),
        config_path: config_path.map(Path::to_path_buf),
        config_sha256: config_sha256.to_string(),
        seed: cfg.mc.seed,
        versions: Versions {
            core: madelung_core::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        elapsed_seconds: elapsed,
        threads,
        output_dir: dir.clone(),
        artifacts: records,
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    manifest_bytes.push(b'\n');
    write(MANIFEST_FILE, &manifest_bytes)?;

    Ok(RunReport {
        experiment: cfg.experiment,
        output_dir: dir.clone(),
        checks: output.checks,
        passed,
    })
}
