//! Run manifests and checksummed output files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::LabError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    ConfigError,
    NumericalFailure,
    IoError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall-clock seconds per task.
    pub timings: BTreeMap<String, f64>,
    /// Relative conservation drifts per trajectory.
    pub drifts: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub notes: BTreeMap<String, serde_json::Value>,
    pub files: Vec<FileEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Output directory that records every file it writes.
#[derive(Debug)]
pub struct OutputDir {
    path: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(path: &Path) -> Result<Self, LabError> {
        fs::create_dir_all(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), LabError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| LabError::Io(e.to_string());
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Io(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), LabError> {
        fs::write(self.path.join(name), bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            config: config.clone(),
            seed: config.effective_seed(),
            version: format!("ilwlab {}", env!("CARGO_PKG_VERSION")),
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: String::new(),
            status: RunStatus::Ok,
            error: None,
            timings: BTreeMap::new(),
            drifts: BTreeMap::new(),
            warnings: Vec::new(),
            notes: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), LabError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| LabError::Io(e.to_string()))?;
        fs::write(dir.join(MANIFEST_NAME), text)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, LabError> {
        let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
        serde_json::from_str(&text).map_err(|e| LabError::Io(format!("bad manifest: {e}")))
    }
}

/// Recomputes the checksum of every file listed in the manifest in `dir`; returns the
/// number of files checked.
pub fn verify_manifest(dir: &Path) -> Result<usize, LabError> {
    let m = RunManifest::read(dir)?;
    for f in &m.files {
        let bytes = fs::read(dir.join(&f.name))?;
        let sum = sha256_hex(&bytes);
        if sum != f.sha256 || bytes.len() as u64 != f.bytes {
            return Err(LabError::Io(format!("checksum mismatch for {}", f.name)));
        }
    }
    Ok(m.files.len())
}
