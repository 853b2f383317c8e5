//! Memoised QMC runs shared by the quench solver and the phase mapper.
//!
//! Runs are keyed by `(L, h, T rounded to 1e-6, precision)`. The run seed is
//! derived from the master seed and that key, so a result never depends on which
//! caller asked first or in what order. With a cache directory, results also
//! persist as JSON files named by a digest of the full run configuration.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{rng::derive_seed, run_qmc, EstimateSet, QmcConfig};
use crate::error::{Error, Result};

/// Version tag stored with cached results; bump when estimator output changes.
pub const ENGINE_VERSION: &str = concat!("sse-2/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    /// A quarter of the measurement sweeps.
    Coarse,
    Full,
}

/// Temperatures are resolved to 1e-6 for caching, seeding and the run itself.
pub fn round_temperature(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub j: f64,
    pub n_thermalization: u64,
    pub n_measure: u64,
    pub n_bins: usize,
    pub n_chains: usize,
    pub master_seed: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            j: 1.0,
            n_thermalization: 10_000,
            n_measure: 100_000,
            n_bins: 32,
            n_chains: 1,
            master_seed: 0,
        }
    }
}

impl SweepSettings {
    pub fn config(&self, l: usize, h: f64, t: f64, precision: Precision) -> QmcConfig {
        let t = round_temperature(t);
        let n_measure = match precision {
            Precision::Full => self.n_measure,
            Precision::Coarse => {
                let bins = self.n_bins as u64;
                (self.n_measure / 4 / bins).max(1) * bins
            }
        };
        let tag = [
            l as u64,
            h.to_bits(),
            (t * 1e6).round() as u64,
            precision as u64,
        ];
        QmcConfig {
            l,
            j: self.j,
            h,
            t,
            n_thermalization: self.n_thermalization,
            n_measure,
            n_bins: self.n_bins,
            rng_seed: derive_seed(self.master_seed, &tag),
            n_chains: self.n_chains,
            max_cutoff: QmcConfig::new(l, h, t).max_cutoff,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Key {
    l: usize,
    h: u64,
    t_micro: i64,
    precision: Precision,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CacheEntry {
    pub engine_version: String,
    pub config: QmcConfig,
    pub estimate: EstimateSet,
}

pub fn cache_file_name(config: &QmcConfig) -> String {
    let key = serde_json::to_vec(&(ENGINE_VERSION, config)).expect("config serializes");
    format!("qmc-{}.json", &crate::io::sha256_hex(&key)[..24])
}

#[derive(Debug)]
pub struct QmcRunner {
    pub settings: SweepSettings,
    cache_dir: Option<PathBuf>,
    memo: Mutex<HashMap<Key, Arc<EstimateSet>>>,
    runs: AtomicUsize,
    hits: AtomicUsize,
}

impl QmcRunner {
    pub fn new(settings: SweepSettings) -> Self {
        Self {
            settings,
            cache_dir: None,
            memo: Mutex::new(HashMap::new()),
            runs: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn cache_dir(&self) -> Option<&Path> {
        self.cache_dir.as_deref()
    }

    /// Number of fresh simulations and memo/disk hits so far.
    pub fn counters(&self) -> (usize, usize) {
        (self.runs.load(Ordering::Relaxed), self.hits.load(Ordering::Relaxed))
    }

    /// Every distinct run served so far with its precision, ordered by `(L, h, T, precision)`.
    pub fn served(&self) -> Vec<(Precision, QmcConfig)> {
        let memo = self.memo.lock().unwrap();
        let mut out: Vec<(Key, Precision, QmcConfig)> =
            memo.iter().map(|(k, e)| (*k, k.precision, e.config.clone())).collect();
        out.sort_by(|a, b| {
            (a.0.l, f64::from_bits(a.0.h), a.0.t_micro, a.0.precision)
                .partial_cmp(&(b.0.l, f64::from_bits(b.0.h), b.0.t_micro, b.0.precision))
                .unwrap()
        });
        out.into_iter().map(|(_, p, c)| (p, c)).collect()
    }

    pub fn run(&self, l: usize, h: f64, t: f64, precision: Precision) -> Result<Arc<EstimateSet>> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("temperature must be positive, got {t}")));
        }
        let key = Key {
            l,
            h: h.to_bits(),
            t_micro: (t * 1e6).round() as i64,
            precision,
        };
        if let Some(hit) = self.memo.lock().unwrap().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Arc::clone(hit));
        }
        if round_temperature(t) <= 0.0 {
            return Err(Error::invalid(format!("temperature {t} rounds to zero")));
        }
        let config = self.settings.config(l, h, t, precision);
        let est = match self.load(&config) {
            Some(e) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                e
            }
            None => {
                let e = run_qmc(&config)?;
                self.runs.fetch_add(1, Ordering::Relaxed);
                self.store(&config, &e)?;
                e
            }
        };
        let est = Arc::new(est);
        // identical keys give identical values, so last writer wins harmlessly
        self.memo.lock().unwrap().insert(key, Arc::clone(&est));
        Ok(est)
    }

    fn load(&self, config: &QmcConfig) -> Option<EstimateSet> {
        let path = self.cache_dir.as_ref()?.join(cache_file_name(config));
        let bytes = std::fs::read(path).ok()?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
        (entry.engine_version == ENGINE_VERSION && entry.config == *config).then_some(entry.estimate)
    }

    fn store(&self, config: &QmcConfig, est: &EstimateSet) -> Result<()> {
        let Some(dir) = &self.cache_dir else {
            return Ok(());
        };
        std::fs::create_dir_all(dir)?;
        let entry = CacheEntry {
            engine_version: ENGINE_VERSION.to_string(),
            config: config.clone(),
            estimate: est.clone(),
        };
        crate::io::cache::store(&dir.join(cache_file_name(config)), &serde_json::to_vec_pretty(&entry)?)
    }
}
