//! Result cache: QMC estimate files and ED spectra, each with a `.sha256` sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{sha256_hex, write_atomic};
use crate::error::Result;

pub const DIGEST_SUFFIX: &str = ".sha256";

const PREFIXES: [&str; 2] = ["qmc-", "spectrum-"];

/// Writes a cache entry and then its digest sidecar.
pub fn store(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes)?;
    write_atomic(&sidecar(path), sha256_hex(bytes).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheItem {
    pub name: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VerifyStatus {
    Ok,
    Mismatch { expected: String, actual: String },
    MissingDigest,
}

fn is_entry(name: &str) -> bool {
    PREFIXES.iter().any(|p| name.starts_with(p)) && !name.ends_with(DIGEST_SUFFIX) && !name.starts_with('.')
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(DIGEST_SUFFIX);
    PathBuf::from(s)
}

/// Cache entries sorted by name; a missing directory is empty.
pub fn list(dir: &Path) -> Result<Vec<CacheItem>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_file() && is_entry(&name) {
            out.push(CacheItem {
                name,
                bytes: entry.metadata()?.len(),
            });
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// Recomputes every entry's digest and compares it with its sidecar.
pub fn verify(dir: &Path) -> Result<Vec<(String, VerifyStatus)>> {
    list(dir)?
        .into_iter()
        .map(|item| {
            let path = dir.join(&item.name);
            let actual = sha256_hex(&std::fs::read(&path)?);
            let status = match std::fs::read_to_string(sidecar(&path)) {
                Ok(expected) if expected.trim() == actual => VerifyStatus::Ok,
                Ok(expected) => VerifyStatus::Mismatch {
                    expected: expected.trim().to_string(),
                    actual,
                },
                Err(_) => VerifyStatus::MissingDigest,
            };
            Ok((item.name, status))
        })
        .collect()
}

/// Removes all entries and sidecars; returns how many entries went.
pub fn purge(dir: &Path) -> Result<usize> {
    let items = list(dir)?;
    for item in &items {
        let path = dir.join(&item.name);
        std::fs::remove_file(&path)?;
        match std::fs::remove_file(sidecar(&path)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
            _ => {}
        }
    }
    Ok(items.len())
}
