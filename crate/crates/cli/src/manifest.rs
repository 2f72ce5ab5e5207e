//! The run manifest: everything needed to reproduce a results directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use gcnshield_core::dataset::BUNDLE_FILES;
use gcnshield_core::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: PathBuf,
    /// SHA-256 of each bundle file, keyed by file name.
    pub sha256: BTreeMap<String, String>,
}

impl DatasetRef {
    pub fn from_bundle(dir: &Path) -> Result<Self> {
        let mut sha256 = BTreeMap::new();
        for name in BUNDLE_FILES {
            let path = dir.join(name);
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            sha256.insert(name.to_string(), hex::encode(Sha256::digest(&bytes)));
        }
        Ok(Self {
            path: dir.to_path_buf(),
            sha256,
        })
    }

    /// Fails when the bundle on disk no longer matches the recorded checksums.
    pub fn verify(&self) -> Result<()> {
        let now = Self::from_bundle(&self.path)?;
        for (name, want) in &self.sha256 {
            if now.sha256.get(name) != Some(want) {
                bail!("{}: checksum differs from the manifest", self.path.join(name).display());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub created_unix: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetRef,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(config: ExperimentConfig, dataset: DatasetRef, output_dir: &Path) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            output_dir: output_dir.to_path_buf(),
            dataset,
            config,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.format_version != MANIFEST_VERSION {
            bail!("{}: unsupported manifest version {}", path.display(), m.format_version);
        }
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
