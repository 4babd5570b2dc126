//! Run manifests: the resolved configuration, input content hashes and tool
//! version written next to every command's outputs.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::signal::io::DatasetManifest;

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// A dataset manifest plus every trial file it lists.
pub fn dataset_files(manifest_path: &Path) -> Result<Vec<PathBuf>> {
    let m = DatasetManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = vec![manifest_path.to_path_buf()];
    for class in &m.classes {
        out.extend(class.files.iter().map(|f| base.join(f)));
    }
    Ok(out)
}

impl RunManifest {
    pub fn new(
        command: &str,
        seed: Option<u64>,
        config: &impl Serialize,
        inputs: &[PathBuf],
    ) -> Result<Self> {
        let config = serde_json::to_value(config)
            .map_err(|e| Error::invalid(format!("config not serialisable: {e}")))?;
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputHash {
                    path: p.clone(),
                    sha256: hash_file(p)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            seed,
            config,
            inputs,
        })
    }

    /// Paths whose current content no longer matches the recorded hash.
    pub fn changed_inputs(&self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for i in &self.inputs {
            if hash_file(&i.path)? != i.sha256 {
                out.push(i.path.clone());
            }
        }
        Ok(out)
    }
}

pub fn write_run_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(RUN_MANIFEST_FILE);
    let text =
        serde_json::to_string_pretty(manifest).map_err(|e| Error::format(&path, e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_run_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
