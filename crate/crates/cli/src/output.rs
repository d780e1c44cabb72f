//! Atomic file writes and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OutputRecord {
    /// File name relative to the output directory.
    pub file: String,
    pub sha256: String,
}

/// Collects the files written by one run.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

impl Outputs {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), records: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `bytes` as `name` inside the output directory and records its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        self.records.push(OutputRecord { file: name.to_string(), sha256: hex::encode(Sha256::digest(bytes)) });
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub seed: u64,
    pub inputs: Vec<OutputRecord>,
    pub versions: Versions,
    pub outputs: &'a [OutputRecord],
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub lpp_cli: &'static str,
    pub manifest_format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self { lpp_cli: env!("CARGO_PKG_VERSION"), manifest_format: 1 }
    }
}

/// Hash record of an input file, for the manifest.
pub fn input_record(path: &Path) -> Result<OutputRecord> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(OutputRecord { file: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
}
