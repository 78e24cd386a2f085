//! `stage.json`: what a stage was run with and what it produced.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "stage.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub seed: u64,
    pub config_hash: String,
    /// Upstream name → hash of its manifest (or of an external file).
    pub inputs: BTreeMap<String, String>,
    /// Path relative to the stage directory → content hash.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> CliResult<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            walk(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root");
            let key = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            if key != MANIFEST {
                out.insert(key, hash_file(&path)?);
            }
        }
    }
    Ok(())
}

/// Content hashes of every file under `dir` except the manifest.
pub fn hash_tree(dir: &Path) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> CliResult<Option<StageManifest>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::Stale(format!("unreadable manifest {}: {e}", path.display())))
}

pub fn write_manifest(dir: &Path, m: &StageManifest) -> CliResult<()> {
    let path = dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// Checks that the files under `dir` still match its manifest. Returns the
/// manifest, or a reason it cannot be trusted.
pub fn verify(dir: &Path) -> CliResult<Result<StageManifest, String>> {
    let Some(m) = read_manifest(dir)? else {
        return Ok(Err(format!("{} has no {MANIFEST}", dir.display())));
    };
    let actual = hash_tree(dir)?;
    if actual != m.outputs {
        let changed = m
            .outputs
            .iter()
            .find(|(k, v)| actual.get(*k) != Some(*v))
            .map(|(k, _)| k.clone())
            .or_else(|| actual.keys().find(|k| !m.outputs.contains_key(*k)).cloned())
            .unwrap_or_default();
        return Ok(Err(format!("{} was modified ({changed})", dir.display())));
    }
    Ok(Ok(m))
}
