//! Run manifests: enough metadata (config echo, grid, digests of every
//! emitted file) to reproduce a run from the manifest alone.

use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::params::{GridSpec, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub grid: GridSpec,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, config: RunConfig, grid: GridSpec) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            grid,
            started_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Writes `bytes` to `dir/name` and records its digest.
    pub fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(dir.join(name), bytes)?;
        self.outputs.push(OutputFile {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Serializes the manifest itself to `dir/manifest.json`.
    pub fn finish(mut self, dir: &Path, wall_clock_seconds: f64) -> io::Result<Self> {
        self.wall_clock_seconds = wall_clock_seconds;
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(dir.join("manifest.json"), json)?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn emit_records_digests_matching_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        let grid = cfg.grid().unwrap();
        let mut m = RunManifest::new("solve", cfg, grid);
        m.emit(dir.path(), "a.csv", b"hello\n").unwrap();
        let m = m.finish(dir.path(), 0.1).unwrap();
        let on_disk = fs::read(dir.path().join("a.csv")).unwrap();
        assert_eq!(sha256_hex(&on_disk), m.outputs[0].sha256);
        assert!(dir.path().join("manifest.json").exists());
    }
}
