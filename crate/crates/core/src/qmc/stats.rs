//! Binning and jackknife error analysis.

use serde::{Deserialize, Serialize};

/// Per-sweep measurement of every directly sampled estimator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Sample {
    pub energy: f64,
    pub zz: f64,
    pub x_sum: f64,
    pub m2: f64,
    pub m4: f64,
    pub cnn: f64,
}

pub(crate) const N_DIRECT: usize = 6;

impl Sample {
    pub(crate) fn as_array(&self) -> [f64; N_DIRECT] {
        [self.energy, self.zz, self.x_sum, self.m2, self.m4, self.cnn]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_bins: usize,
    /// Integrated autocorrelation time in sweeps, from the bin-to-raw variance ratio.
    pub tau_int: Option<f64>,
}

/// Accumulates samples into fixed-size bins.
#[derive(Debug, Clone)]
pub struct Binner {
    bin_size: u64,
    current: [f64; N_DIRECT],
    in_current: u64,
    bins: Vec<[f64; N_DIRECT]>,
    raw_sum: [f64; N_DIRECT],
    raw_sq: [f64; N_DIRECT],
    n_raw: u64,
}

impl Binner {
    pub fn new(bin_size: u64, n_bins: usize) -> Self {
        Self {
            bin_size,
            current: [0.0; N_DIRECT],
            in_current: 0,
            bins: Vec::with_capacity(n_bins),
            raw_sum: [0.0; N_DIRECT],
            raw_sq: [0.0; N_DIRECT],
            n_raw: 0,
        }
    }

    pub fn push(&mut self, s: &Sample) {
        let a = s.as_array();
        for (k, &x) in a.iter().enumerate().take(N_DIRECT) {
            self.current[k] += x;
            self.raw_sum[k] += x;
            self.raw_sq[k] += x * x;
        }
        self.n_raw += 1;
        self.in_current += 1;
        if self.in_current == self.bin_size {
            let inv = 1.0 / self.bin_size as f64;
            self.bins.push(self.current.map(|x| x * inv));
            self.current = [0.0; N_DIRECT];
            self.in_current = 0;
        }
    }

    /// Bin means per observable.
    pub fn series(&self) -> [Vec<f64>; N_DIRECT] {
        std::array::from_fn(|k| self.bins.iter().map(|b| b[k]).collect())
    }

    pub fn estimate(&self, k: usize) -> Estimate {
        let series: Vec<f64> = self.bins.iter().map(|b| b[k]).collect();
        let mut est = bin_estimate(&series);
        let n = self.n_raw as f64;
        if n > 1.0 {
            let mean = self.raw_sum[k] / n;
            let raw_var = (self.raw_sq[k] / n - mean * mean).max(0.0);
            let nb = series.len() as f64;
            if raw_var > 0.0 && nb > 1.0 {
                let bin_var = est.stderr * est.stderr * nb;
                est.tau_int = Some(0.5 * self.bin_size as f64 * bin_var / raw_var);
            } else {
                est.tau_int = Some(0.5);
            }
        }
        est
    }
}

/// Mean and standard error of a series of (assumed independent) bin means.
pub fn bin_estimate(series: &[f64]) -> Estimate {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Estimate {
        mean,
        stderr,
        n_bins: n,
        tau_int: None,
    }
}

pub fn binder(m2: f64, m4: f64) -> f64 {
    if m2 > 0.0 {
        1.0 - m4 / (3.0 * m2 * m2)
    } else {
        0.0
    }
}

/// Bias-corrected jackknife estimate of the Binder cumulant from paired bin series.
pub fn jackknife_binder(m2: &[f64], m4: &[f64]) -> Estimate {
    let n = m2.len();
    let s2: f64 = m2.iter().sum();
    let s4: f64 = m4.iter().sum();
    let full = binder(s2 / n as f64, s4 / n as f64);
    if n < 2 {
        return Estimate {
            mean: full,
            stderr: 0.0,
            n_bins: n,
            tau_int: None,
        };
    }
    let loo: Vec<f64> = (0..n)
        .map(|k| binder((s2 - m2[k]) / (n - 1) as f64, (s4 - m4[k]) / (n - 1) as f64))
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|u| (u - loo_mean).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    Estimate {
        mean: n as f64 * full - (n - 1) as f64 * loo_mean,
        stderr: var.sqrt(),
        n_bins: n,
        tau_int: None,
    }
}
