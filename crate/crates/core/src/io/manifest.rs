//! Run manifests: everything needed to regenerate a command's data files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Command, RunConfig};
use super::sha256_hex;
use crate::error::{Error, Result};
use crate::qmc::{runner::ENGINE_VERSION, Precision, QmcConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub l: usize,
    pub h: f64,
    pub t: f64,
    pub precision: Precision,
    pub n_measure: u64,
    pub seed: u64,
}

impl SeedRecord {
    pub fn new(precision: Precision, c: &QmcConfig) -> Self {
        Self {
            l: c.l,
            h: c.h,
            t: c.t,
            precision,
            n_measure: c.n_measure,
            seed: c.rng_seed,
        }
    }
}

/// How per-run seeds follow from the master seed.
pub const SEED_DERIVATION: &str =
    "seed = fold over [L, bits(h), round(T*1e6), precision (0 coarse, 1 full)] of acc -> splitmix64(acc ^ splitmix64(x)), starting from splitmix64(master); chain k draws from ChaCha8 stream k of that seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub engine_version: String,
    pub command: Command,
    pub config: RunConfig,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub seeds: Vec<SeedRecord>,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(command: Command, config: RunConfig) -> Self {
        Self {
            schema_version: super::SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            engine_version: ENGINE_VERSION.to_string(),
            command,
            master_seed: config.run.seed,
            config,
            seed_derivation: SEED_DERIVATION.to_string(),
            seeds: Vec::new(),
            started_unix_s: 0,
            wall_time_s: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: not a run manifest: {e}", path.display())))
    }

    /// Files under `dir` whose digest differs from the recorded one (or that are missing).
    pub fn mismatches(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|o| match std::fs::read(dir.join(&o.file)) {
                Ok(bytes) => sha256_hex(&bytes) != o.sha256,
                Err(_) => true,
            })
            .map(|o| o.file.clone())
            .collect()
    }
}
