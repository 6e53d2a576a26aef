use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::error::{invalid, CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub warnings: Vec<String>,
    pub wall_time_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Reads an input file; a missing or unreadable input is a validation error.
pub fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| invalid(format!("cannot read input {}: {e}", path.display())))
}

/// Files a command produced, held in memory until everything succeeded.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
    /// Files written by the command itself (e.g. a resumable ledger),
    /// relative to the output directory.
    pub external: Vec<String>,
    /// Set when the command failed after producing files worth keeping
    /// (a partially trained model); reported after the files are written.
    pub failure: Option<CliError>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    /// Writes every file, then the manifest describing them.
    pub fn commit(self, out_dir: &Path, mut manifest: RunManifest) -> CliResult<()> {
        let Outputs {
            files,
            warnings,
            external,
            failure,
        } = self;
        fs::create_dir_all(out_dir)?;
        let mut outputs = Vec::new();
        for (name, bytes) in &files {
            let path = out_dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, bytes)?;
            outputs.push(FileDigest {
                path: name.clone(),
                sha256: sha256_hex(bytes),
            });
        }
        for name in &external {
            let bytes = fs::read(out_dir.join(name))?;
            outputs.push(FileDigest {
                path: name.clone(),
                sha256: sha256_hex(&bytes),
            });
        }
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.outputs = outputs;
        manifest.warnings = warnings;
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(out_dir.join(MANIFEST), bytes)?;
        failure.map_or(Ok(()), Err)
    }
}

/// Input files with their digests, in the order given.
pub fn digest_inputs(paths: &[(PathBuf, Vec<u8>)]) -> Vec<FileDigest> {
    paths
        .iter()
        .map(|(p, bytes)| FileDigest {
            path: p.display().to_string(),
            sha256: sha256_hex(bytes),
        })
        .collect()
}
