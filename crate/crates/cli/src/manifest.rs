//! Run manifest: the per-run ledger of produced artifacts and their
//! content digests, written alongside the artifacts as `run_manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tse_core::error::{Error, Result};

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Reference to the effective scenario written into the run directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioRef {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
}

/// Ledger of one run directory: which scenario and seed produced it, and
/// the content digest of every artifact a command has written so far.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// The run directory as given on the command line.
    pub out_dir: String,
    /// Effective seed of the scenario in this run.
    pub seed: u64,
    pub scenario: ScenarioRef,
    /// Artifact file name -> sha256 of its bytes on disk.
    pub artifacts: BTreeMap<String, String>,
}

/// Hex sha256 of a file's bytes.
pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

impl RunManifest {
    /// Fresh manifest for a run directory that already holds scenario.json.
    pub fn create(dir: &Path, out_dir: &str, seed: u64) -> Result<Self> {
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            out_dir: out_dir.to_string(),
            seed,
            scenario: ScenarioRef {
                path: "scenario.json".to_string(),
                sha256: sha256_hex(&dir.join("scenario.json"))?,
            },
            artifacts: BTreeMap::new(),
        })
    }

    /// Load the manifest of a run directory, or start a fresh one (with the
    /// given seed) when no command has written one yet.
    pub fn load_or_create(dir: &Path, out_dir: &str, seed: u64) -> Result<Self> {
        let path = manifest_path(dir);
        if !path.exists() {
            return Self::create(dir, out_dir, seed);
        }
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path,
            line: e.line() as u64,
            msg: e.to_string(),
        })
    }

    /// Record (or refresh) the digest of an artifact in the run directory.
    pub fn record(&mut self, dir: &Path, name: &str) -> Result<()> {
        let digest = sha256_hex(&dir.join(name))?;
        self.artifacts.insert(name.to_string(), digest);
        Ok(())
    }

    /// Re-digest the scenario and write the manifest back to the run
    /// directory, keeping the on-disk invariant: digests match files.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.scenario.sha256 = sha256_hex(&dir.join(&self.scenario.path))?;
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
        std::fs::write(manifest_path(dir), text + "\n")?;
        Ok(())
    }
}
