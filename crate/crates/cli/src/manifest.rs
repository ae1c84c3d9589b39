use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliResult, RunConfig};

/// Record of a training run, written before training starts and updated
/// when it finishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    /// Command line that started the run.
    pub argv: Vec<String>,
    pub seed: u64,
    /// Fully resolved configuration (file, then flags, then corpus-derived sizes).
    pub config: RunConfig,
    pub corpus: CorpusRef,
    pub checkpoints: Vec<String>,
    pub log: String,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRef {
    pub path: String,
    /// SHA-256 of each corpus file, keyed by file name.
    pub sha256: BTreeMap<String, String>,
}

impl CorpusRef {
    pub fn hash_dir(dir: &Path, files: &[&str]) -> CliResult<CorpusRef> {
        let mut sha256 = BTreeMap::new();
        for f in files {
            let path = dir.join(f);
            if path.exists() {
                sha256.insert(f.to_string(), sha256_file(&path)?);
            }
        }
        let path = std::fs::canonicalize(dir).unwrap_or_else(|_| dir.to_path_buf());
        Ok(CorpusRef {
            path: path.display().to_string(),
            sha256,
        })
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Manifest> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
