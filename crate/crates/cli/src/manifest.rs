//! Experiment manifests: the exact invocation, its configuration and the
//! content hashes of everything read and written.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::input(path, e))?;
        Ok(Self { path: path.to_owned(), sha256: hex::encode(Sha256::digest(&bytes)) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(path, e))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| CliError::output(path, e))
    }
}

/// Collects what a command touched and writes its manifest.
pub struct Recorder {
    command: &'static str,
    args: Vec<String>,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(command: &'static str, args: &[String]) -> Self {
        Self { command, args: args.to_vec(), config: serde_json::Value::Null, inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> CliResult<()> {
        self.config = serde_json::to_value(config).map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(())
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_owned());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_owned());
    }

    pub fn finish(self, manifest_path: &Path) -> CliResult<ExperimentManifest> {
        let hash_all = |paths: &[PathBuf]| paths.iter().map(|p| FileHash::of(p)).collect::<CliResult<Vec<_>>>();
        let manifest = ExperimentManifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: self.command.to_owned(),
            args: self.args,
            config: self.config,
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
        };
        manifest.save(manifest_path)?;
        log::info!("wrote {}", manifest_path.display());
        Ok(manifest)
    }
}

/// Manifest location for a single-file output.
pub fn manifest_for_file(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abc");
        fs::write(&path, b"abc").unwrap();
        assert_eq!(
            FileHash::of(&path).unwrap().sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn file_manifest_sits_next_to_output() {
        assert_eq!(manifest_for_file(Path::new("out/model.rbwe")), Path::new("out/model.rbwe.manifest.json"));
    }
}
