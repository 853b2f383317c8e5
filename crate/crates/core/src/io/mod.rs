//! Persistence: atomic writes, digests, CSV/JSON outputs, run manifests and the result cache.

pub mod cache;
pub mod commands;
pub mod config;
pub mod manifest;

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::ed::ObservableKind;
use crate::error::{Error, Result};

/// Version of the CSV/JSON output layout, written into every row and sidecar.
pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// ED observable by its output column name (`total_energy`, `zz_bond_sum`, `x_sum`, `M2`, `M4`, `C_nn`).
pub fn observable_by_name(name: &str) -> Result<ObservableKind> {
    Ok(match name {
        "total_energy" => ObservableKind::TotalEnergy,
        "zz_bond_sum" => ObservableKind::ZzBondSum,
        "x_sum" => ObservableKind::XSum,
        "M2" => ObservableKind::M2,
        "M4" => ObservableKind::M4,
        "C_nn" => ObservableKind::Cnn,
        other => return Err(Error::invalid(format!("unknown observable `{other}`"))),
    })
}
