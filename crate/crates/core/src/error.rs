use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One probe of the Binder-cumulant difference taken while searching for a crossing.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScanPoint {
    pub t: f64,
    /// `U(L_large) - U(L_small)`
    pub delta_u: f64,
    pub delta_u_err: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {what} ({value} > limit {limit})")]
    ResourceLimit {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("qmc diagnostics: {0}")]
    Diagnostics(String),

    #[error("bracket failure: E_q = {e_q} outside [{e_lo}, {e_hi}] for T in [{t_lo}, {t_hi}]")]
    BracketFailure {
        e_q: f64,
        t_lo: f64,
        t_hi: f64,
        e_lo: f64,
        e_hi: f64,
    },

    #[error("data quality: {0}")]
    DataQuality(String),

    #[error("no Binder crossing at h = {h} in the scanned range ({} probes)", scan.len())]
    CrossingNotFound { h: f64, scan: Vec<ScanPoint> },

    #[error("fit failure: {}", trace.last().map(String::as_str).unwrap_or("no iterations"))]
    FitFailure { trace: Vec<String> },

    #[error("config error: {0}")]
    Config(String),

    #[error("cache format error in {path}: {reason}")]
    CacheFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
