use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output root (with `..` components when outside it).
    pub path: String,
    pub sha256: String,
}

/// Provenance of one stage's outputs. Contains no timestamps so that
/// identical runs write identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(stage: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            stage: stage.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn shown(root: &Path, path: &Path) -> String {
        relative_to(root, path).to_string_lossy().replace('\\', "/")
    }

    fn record(root: &Path, path: &Path) -> Result<FileRecord> {
        Ok(FileRecord {
            path: Self::shown(root, path),
            sha256: sha256_file(path)?,
        })
    }

    pub fn add_input(&mut self, root: &Path, path: &Path) -> Result<()> {
        self.inputs.push(Self::record(root, path)?);
        Ok(())
    }

    pub fn add_output(&mut self, root: &Path, path: &Path) -> Result<()> {
        self.outputs.push(Self::record(root, path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn resolve(root: &Path, rec: &FileRecord) -> PathBuf {
        let p = PathBuf::from(&rec.path);
        if p.is_absolute() {
            p
        } else {
            root.join(p)
        }
    }

    /// Fails with [`Error::Stale`] if any recorded input or output no longer
    /// matches its checksum (or is missing).
    pub fn verify(&self, root: &Path) -> Result<()> {
        for (kind, rec) in self
            .inputs
            .iter()
            .map(|r| ("input", r))
            .chain(self.outputs.iter().map(|r| ("output", r)))
        {
            let path = Self::resolve(root, rec);
            let current = sha256_file(&path).map_err(|_| Error::Stale {
                path: path.clone(),
                msg: format!("{} {kind} recorded by the manifest is missing", self.stage),
            })?;
            if current != rec.sha256 {
                return Err(Error::Stale {
                    path,
                    msg: format!(
                        "{kind} changed since the {} stage ran; rerun it or pass --force",
                        self.stage
                    ),
                });
            }
        }
        Ok(())
    }

    /// Checksum of an output recorded by this manifest.
    pub fn output_checksum(&self, root: &Path, path: &Path) -> Option<&str> {
        let shown = Self::shown(root, path);
        self.outputs
            .iter()
            .find(|r| r.path == shown)
            .map(|r| r.sha256.as_str())
    }
}

fn normalize(path: &Path) -> PathBuf {
    let abs = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

/// `path` expressed relative to `root`; absolute if they share no prefix.
fn relative_to(root: &Path, path: &Path) -> PathBuf {
    let root = normalize(root);
    let path = normalize(path);
    let rc: Vec<_> = root.components().collect();
    let pc: Vec<_> = path.components().collect();
    let common = rc.iter().zip(&pc).take_while(|(a, b)| a == b).count();
    if common == 0 {
        return path;
    }
    let mut out = PathBuf::new();
    for _ in common..rc.len() {
        out.push("..");
    }
    for c in &pc[common..] {
        out.push(c);
    }
    out
}
