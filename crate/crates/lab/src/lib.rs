//! Experiment orchestration for the ILW/KdV laboratory: configuration, δ-grid runs,
//! CSV output and checksummed manifests.

pub mod config;
pub mod experiments;
pub mod manifest;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{Experiment, RunConfig};
pub use manifest::{verify_manifest, RunManifest, RunStatus};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    /// Process exit code: 2 for configuration errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Numerical(_) => 3,
            LabError::Io(_) => 1,
        }
    }
}

impl From<ilwlab_core::Error> for LabError {
    fn from(e: ilwlab_core::Error) -> Self {
        match e {
            ilwlab_core::Error::Config(_) | ilwlab_core::Error::SmallnessGate { .. } => {
                LabError::Config(e.to_string())
            }
            _ => LabError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

/// Runs `config` with outputs in `out_dir` on a pool of `threads` workers (rayon's
/// default when `None`). The manifest is written whether or not the run succeeds;
/// it is returned together with the run's error, if any.
pub fn run_with(
    config: &RunConfig,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<(RunManifest, Option<LabError>), LabError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(LabError::Config("thread count must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| LabError::Config(e.to_string()))?;
    pool.install(|| experiments::run(config, out_dir))
}

/// Command-line entry: resolves the config and output directory, runs, and returns
/// the exit code.
pub fn main_with(experiment: &str, config: Option<PathBuf>, out: Option<PathBuf>, threads: Option<usize>) -> i32 {
    let result = (|| -> Result<Option<LabError>, LabError> {
        if experiment == "verify" {
            let dir = out.ok_or_else(|| LabError::Config("verify needs --out <dir>".into()))?;
            let files = verify_manifest(&dir)?;
            println!("{}: {files} files verified", dir.display());
            return Ok(None);
        }
        let wanted = Experiment::parse(experiment)
            .ok_or_else(|| LabError::Config(format!("unknown experiment '{experiment}'")))?;
        let path = config.ok_or_else(|| LabError::Config("--config <file> is required".into()))?;
        let cfg = RunConfig::load(&path)?;
        if cfg.experiment != wanted {
            return Err(LabError::Config(format!(
                "config describes '{}' but '{wanted}' was requested",
                cfg.experiment
            )));
        }
        let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
        let (manifest, err) = run_with(&cfg, &dir, threads)?;
        println!(
            "{}: {:?}, {} files in {}",
            cfg.experiment,
            manifest.status,
            manifest.files.len(),
            dir.display()
        );
        Ok(err)
    })();
    match result {
        Ok(None) => 0,
        Ok(Some(e)) | Err(e) => {
            eprintln!("lab: {e}");
            e.exit_code()
        }
    }
}
