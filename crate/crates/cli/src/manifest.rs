//! Run manifests: the effective configuration plus digests of every file read or written.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Options;
use crate::error::CliError;

pub const FILE_NAME: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of_bytes(path: impl Into<String>, bytes: &[u8]) -> Self {
        FileDigest { path: path.into(), sha256: hex::encode(Sha256::digest(bytes)), bytes: bytes.len() as u64 }
    }

    pub fn of_file(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)?;
        Ok(Self::of_bytes(path.to_string_lossy(), &bytes))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub started_unix: u64,
    /// Wall clock time, recorded but never compared.
    pub wall_seconds: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub config: Options,
    #[serde(default)]
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the run directory.
    pub outputs: Vec<FileDigest>,
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Manifest {
    pub fn new(command: &str, config: &Options, started_unix: u64) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed(),
            started_unix,
            wall_seconds: 0.0,
            warnings: Vec::new(),
            config: Options { seed: Some(config.seed()), ..config.clone() },
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(CliError::runtime)
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(FILE_NAME);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    }

    /// Outputs whose current contents no longer match the recorded digest.
    pub fn stale_outputs(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|d| match std::fs::read(dir.join(&d.path)) {
                Ok(bytes) => FileDigest::of_bytes(&d.path, &bytes) != **d,
                Err(_) => true,
            })
            .map(|d| d.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let d = FileDigest::of_bytes("x", b"abc");
        assert_eq!(d.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(d.bytes, 3);
    }

    #[test]
    fn round_trip_and_staleness() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "1\n").unwrap();
        let mut m = Manifest::new("sample", &Options { rate: Some(0.2), ..Default::default() }, 0);
        m.outputs.push(FileDigest::of_bytes("a.csv", b"1\n"));
        std::fs::write(dir.path().join(FILE_NAME), m.to_toml().unwrap()).unwrap();
        let back = Manifest::read(dir.path()).unwrap();
        assert_eq!(back.config.rate, Some(0.2));
        assert!(back.stale_outputs(dir.path()).is_empty());
        std::fs::write(dir.path().join("a.csv"), "2\n").unwrap();
        assert_eq!(back.stale_outputs(dir.path()), vec!["a.csv".to_string()]);
    }
}
