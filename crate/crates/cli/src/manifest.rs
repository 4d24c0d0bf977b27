//! Output layout, stage manifests and the errors the CLI reports by kind.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Where each stage writes under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn catalog(&self) -> PathBuf {
        self.out.join("catalog")
    }

    pub fn events(&self) -> PathBuf {
        self.catalog().join("events.csv")
    }

    pub fn series(&self) -> PathBuf {
        self.out.join("series")
    }

    pub fn graph(&self) -> PathBuf {
        self.out.join("graph")
    }

    pub fn features(&self) -> PathBuf {
        self.out.join("features")
    }

    pub fn model(&self, name: &str) -> PathBuf {
        self.out.join("models").join(name)
    }

    pub fn predictions(&self) -> PathBuf {
        self.out.join("predictions")
    }

    pub fn prediction(&self, name: &str) -> PathBuf {
        self.predictions().join(format!("{name}.csv"))
    }

    pub fn eval(&self) -> PathBuf {
        self.out.join("eval")
    }

    pub fn nowcast(&self) -> PathBuf {
        self.out.join("nowcast")
    }

    /// Path relative to the output directory, for manifests.
    pub fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.out)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }
}

/// Upstream artifact that a stage needs but cannot find.
#[derive(Debug)]
pub struct MissingArtifact {
    pub path: PathBuf,
    pub command: &'static str,
}

impl fmt::Display for MissingArtifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "missing {}; run `quakecast {}` first",
            self.path.display(),
            self.command
        )
    }
}

impl std::error::Error for MissingArtifact {}

/// Configuration problems, reported together.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0.join("; "))
    }
}

impl std::error::Error for ConfigError {}

pub fn require(path: &Path, command: &'static str) -> anyhow::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(MissingArtifact {
            path: path.to_path_buf(),
            command,
        }
        .into())
    }
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(digest_bytes(&bytes))
}

/// Record written next to every stage's outputs. It carries no timestamps,
/// so re-running a stage on unchanged inputs rewrites it byte for byte.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub stage: String,
    pub toolkit_version: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new(stage: &str, config_hash: &str) -> Self {
        Manifest {
            stage: stage.into(),
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            summary: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, key: String, path: &Path) -> anyhow::Result<()> {
        self.inputs.insert(key, digest_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, layout: &Layout, path: &Path) -> anyhow::Result<()> {
        self.outputs.insert(layout.relative(path), digest_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }
}
