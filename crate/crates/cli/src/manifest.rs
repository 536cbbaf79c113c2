//! Run manifests: what was read, what was written, and how to check it.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// Data rows of CSV outputs, excluding the header.
    pub rows: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<OutputRecord>,
    pub wall_time_s: f64,
    pub exit_code: u8,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn csv_rows(bytes: &[u8]) -> u64 {
    (bytes.iter().filter(|b| **b == b'\n').count() as u64).saturating_sub(1)
}

/// Reads a file and records its hash.
pub fn read_input(path: &Path) -> CliResult<(String, InputRecord)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let record = InputRecord {
        path: path.display().to_string(),
        sha256: sha256_hex(text.as_bytes()),
    };
    Ok((text, record))
}

/// Writes files under one directory and remembers them for the manifest.
pub struct OutputDir {
    root: PathBuf,
    records: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.records.push(OutputRecord {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
            rows: rel.ends_with(".csv").then(|| csv_rows(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Manifest(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Writes `manifest.json` and checks it against the files on disk.
    pub fn finish(
        self,
        command: &str,
        config: serde_json::Value,
        inputs: Vec<InputRecord>,
        start: Instant,
        exit_code: u8,
    ) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            inputs,
            outputs: self.records,
            wall_time_s: start.elapsed().as_secs_f64(),
            exit_code,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Manifest(e.to_string()))?;
        text.push('\n');
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        verify(&self.root)
    }
}

/// Re-reads a manifest and every output it lists, checking hashes, sizes and row counts.
pub fn verify(dir: &Path) -> CliResult<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::json(&path, &e))?;
    for out in &manifest.outputs {
        let file = dir.join(&out.path);
        let bytes = fs::read(&file).map_err(|e| CliError::io(&file, e))?;
        if bytes.len() as u64 != out.bytes {
            return Err(CliError::Manifest(format!(
                "{}: {} bytes on disk, {} recorded",
                out.path,
                bytes.len(),
                out.bytes
            )));
        }
        if sha256_hex(&bytes) != out.sha256 {
            return Err(CliError::Manifest(format!("{}: sha256 mismatch", out.path)));
        }
        if out.rows.is_some() && out.rows != Some(csv_rows(&bytes)) {
            return Err(CliError::Manifest(format!("{}: row count mismatch", out.path)));
        }
    }
    Ok(manifest)
}
