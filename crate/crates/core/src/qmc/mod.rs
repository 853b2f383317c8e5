//! Equilibrium quantum Monte Carlo (stochastic series expansion).

mod classical;
pub mod runner;
pub mod rng;
pub mod sse;
pub mod stats;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use classical::ClassicalIsing;
pub use sse::{Operator, SseModel, SseState};
pub use stats::{Estimate, Sample};
pub use runner::{Precision, QmcRunner, SweepSettings};

use crate::error::{Error, Result};
use crate::lattice::build_lattice;
use stats::{Binner, N_DIRECT};

fn default_max_cutoff() -> usize {
    50_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmcConfig {
    pub l: usize,
    pub j: f64,
    pub h: f64,
    pub t: f64,
    pub n_thermalization: u64,
    pub n_measure: u64,
    pub n_bins: usize,
    pub rng_seed: u64,
    pub n_chains: usize,
    /// Safety bound on the operator-string length.
    #[serde(default = "default_max_cutoff")]
    pub max_cutoff: usize,
}

impl QmcConfig {
    /// Default sweep budget: 10^4 thermalization, 10^5 measurement in 32 bins.
    pub fn new(l: usize, h: f64, t: f64) -> Self {
        Self {
            l,
            j: 1.0,
            h,
            t,
            n_thermalization: 10_000,
            n_measure: 100_000,
            n_bins: 32,
            rng_seed: 0,
            n_chains: 1,
            max_cutoff: default_max_cutoff(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_sweeps(mut self, n_thermalization: u64, n_measure: u64) -> Self {
        self.n_thermalization = n_thermalization;
        self.n_measure = n_measure;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::invalid(format!("temperature must be positive and finite, got {}", self.t)));
        }
        crate::lattice::ModelParams::new(self.j, self.h)?;
        if self.j < 0.0 {
            return Err(Error::invalid("coupling J must be >= 0 (ferromagnet)"));
        }
        build_lattice(self.l)?;
        if self.n_bins < 16 {
            return Err(Error::invalid(format!("need at least 16 bins, got {}", self.n_bins)));
        }
        if self.n_measure == 0 || !self.n_measure.is_multiple_of(self.n_bins as u64) {
            return Err(Error::invalid(format!(
                "n_measure ({}) must be a positive multiple of n_bins ({})",
                self.n_measure, self.n_bins
            )));
        }
        if self.n_chains == 0 {
            return Err(Error::invalid("n_chains must be >= 1"));
        }
        Ok(())
    }

    /// Config with the seed and chain count cleared, for merge compatibility checks.
    fn physics_key(&self) -> Self {
        Self {
            rng_seed: 0,
            n_chains: 0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observable {
    #[serde(rename = "total_energy")]
    TotalEnergy,
    #[serde(rename = "zz_bond_sum")]
    ZzBondSum,
    #[serde(rename = "x_sum")]
    XSum,
    M2,
    M4,
    #[serde(rename = "binder_U")]
    BinderU,
    #[serde(rename = "C_nn")]
    Cnn,
}

impl Observable {
    pub const ALL: [Observable; 7] = [
        Observable::TotalEnergy,
        Observable::ZzBondSum,
        Observable::XSum,
        Observable::M2,
        Observable::M4,
        Observable::BinderU,
        Observable::Cnn,
    ];

    /// Sampled directly, in `Sample` order.
    const DIRECT: [Observable; N_DIRECT] = [
        Observable::TotalEnergy,
        Observable::ZzBondSum,
        Observable::XSum,
        Observable::M2,
        Observable::M4,
        Observable::Cnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::TotalEnergy => "total_energy",
            Observable::ZzBondSum => "zz_bond_sum",
            Observable::XSum => "x_sum",
            Observable::M2 => "M2",
            Observable::M4 => "M4",
            Observable::BinderU => "binder_U",
            Observable::Cnn => "C_nn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmcDiagnostics {
    /// `"sse"` or `"classical"`.
    pub path: String,
    pub final_cutoff: usize,
    pub mean_operators: f64,
    pub chains: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub config: QmcConfig,
    pub total_energy: Estimate,
    pub zz_bond_sum: Estimate,
    pub x_sum: Estimate,
    #[serde(rename = "M2")]
    pub m2: Estimate,
    #[serde(rename = "M4")]
    pub m4: Estimate,
    #[serde(rename = "binder_U")]
    pub binder_u: Estimate,
    #[serde(rename = "C_nn")]
    pub cnn: Estimate,
    pub diagnostics: QmcDiagnostics,
    /// Bin means of the directly sampled observables, chain after chain.
    #[serde(skip)]
    pub bins: Vec<[f64; N_DIRECT]>,
}

impl EstimateSet {
    pub fn get(&self, obs: Observable) -> Estimate {
        match obs {
            Observable::TotalEnergy => self.total_energy,
            Observable::ZzBondSum => self.zz_bond_sum,
            Observable::XSum => self.x_sum,
            Observable::M2 => self.m2,
            Observable::M4 => self.m4,
            Observable::BinderU => self.binder_u,
            Observable::Cnn => self.cnn,
        }
    }

    fn set(&mut self, obs: Observable, e: Estimate) {
        *match obs {
            Observable::TotalEnergy => &mut self.total_energy,
            Observable::ZzBondSum => &mut self.zz_bond_sum,
            Observable::XSum => &mut self.x_sum,
            Observable::M2 => &mut self.m2,
            Observable::M4 => &mut self.m4,
            Observable::BinderU => &mut self.binder_u,
            Observable::Cnn => &mut self.cnn,
        } = e;
    }

    /// Raw bins as CSV rows `bin_index,observable,value`.
    pub fn write_bins_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_index", "observable", "value"])?;
        for (k, bin) in self.bins.iter().enumerate() {
            for (obs, v) in Observable::DIRECT.iter().zip(bin) {
                w.write_record([k.to_string(), obs.name().to_string(), format!("{v:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

struct ChainOutput {
    binner: Binner,
    final_cutoff: usize,
    mean_operators: f64,
    classical: bool,
}

fn run_chain(config: &QmcConfig, chain: u64) -> Result<ChainOutput> {
    let lattice = build_lattice(config.l)?;
    let mut rng = rng::chain_rng(config.rng_seed, chain);
    let bin_size = config.n_measure / config.n_bins as u64;
    let mut binner = Binner::new(bin_size, config.n_bins);

    if config.h == 0.0 {
        let mut sim = ClassicalIsing::new(&lattice, config.j, config.t, &mut rng);
        for _ in 0..config.n_thermalization {
            sim.sweep(&mut rng);
        }
        sim.fix_cluster_count();
        for _ in 0..config.n_measure {
            sim.sweep(&mut rng);
            binner.push(&sim.measure());
        }
        return Ok(ChainOutput {
            binner,
            final_cutoff: 0,
            mean_operators: 0.0,
            classical: true,
        });
    }

    let model = SseModel::new(&lattice, config.j, config.h, config.t);
    let initial = (lattice.n_sites() / 4).max(16);
    let mut state = SseState::new(lattice.n_sites(), initial, &mut rng);
    for _ in 0..config.n_thermalization {
        state.diagonal_update(&model, &mut rng);
        let target = (1.3 * state.n_ops() as f64).ceil() as usize;
        if target > state.cutoff() {
            if target > config.max_cutoff {
                return Err(Error::Diagnostics(format!(
                    "operator cutoff {target} exceeds safety bound {} (L={}, h={}, T={})",
                    config.max_cutoff, config.l, config.h, config.t
                )));
            }
            state.grow_cutoff(target);
        }
        state.cluster_update(&model, &mut rng);
        debug_assert!(state.check_invariants(&model).is_ok());
    }
    let mut n_sum = 0.0;
    for _ in 0..config.n_measure {
        state.diagonal_update(&model, &mut rng);
        state.cluster_update(&model, &mut rng);
        debug_assert!(state.check_invariants(&model).is_ok());
        n_sum += state.n_ops() as f64;
        binner.push(&state.measure(&model));
    }
    Ok(ChainOutput {
        binner,
        final_cutoff: state.cutoff(),
        mean_operators: n_sum / config.n_measure as f64,
        classical: false,
    })
}

fn chain_set(config: &QmcConfig, out: ChainOutput) -> EstimateSet {
    let series = out.binner.series();
    let m2_idx = 3;
    let m4_idx = 4;
    let est = |k: usize| out.binner.estimate(k);
    let mut binder = stats::jackknife_binder(&series[m2_idx], &series[m4_idx]);
    binder.tau_int = None;
    let bins: Vec<[f64; N_DIRECT]> = (0..series[0].len())
        .map(|b| std::array::from_fn(|k| series[k][b]))
        .collect();
    EstimateSet {
        config: config.clone(),
        total_energy: est(0),
        zz_bond_sum: est(1),
        x_sum: est(2),
        m2: est(3),
        m4: est(4),
        binder_u: binder,
        cnn: est(5),
        diagnostics: QmcDiagnostics {
            path: if out.classical { "classical" } else { "sse" }.into(),
            final_cutoff: out.final_cutoff,
            mean_operators: out.mean_operators,
            chains: 1,
        },
        bins,
    }
}

/// Runs `config.n_chains` independent chains in parallel and pools them.
///
/// Deterministic in `(config, rng_seed)`: chain `c` draws from stream `c` of the
/// seed, and pooling happens in chain order.
pub fn run_qmc(config: &QmcConfig) -> Result<EstimateSet> {
    config.validate()?;
    let sets = (0..config.n_chains as u64)
        .into_par_iter()
        .map(|c| run_chain(config, c).map(|out| chain_set(config, out)))
        .collect::<Result<Vec<_>>>()?;
    let mut merged = merge_chains(&sets)?;
    merged.config = config.clone();
    Ok(merged)
}

/// Pools independent estimate sets: bin-count weighted means, and
/// `stderr^2 = sum_k w_k^2 stderr_k^2` with `w_k = n_k / sum n`.
pub fn merge_chains(sets: &[EstimateSet]) -> Result<EstimateSet> {
    let first = sets.first().ok_or_else(|| Error::invalid("no estimate sets to merge"))?;
    if sets.len() == 1 {
        return Ok(first.clone());
    }
    let key = first.config.physics_key();
    if sets.iter().any(|s| s.config.physics_key() != key) {
        return Err(Error::invalid("cannot merge estimate sets with different configurations"));
    }
    let mut out = first.clone();
    let total_bins: usize = sets.iter().map(|s| s.get(Observable::TotalEnergy).n_bins).sum();
    for obs in Observable::ALL {
        let mut mean = 0.0;
        let mut var = 0.0;
        let mut tau_sum = 0.0;
        let mut tau_n = 0;
        for s in sets {
            let e = s.get(obs);
            let w = e.n_bins as f64 / total_bins as f64;
            mean += w * e.mean;
            var += w * w * e.stderr * e.stderr;
            if let Some(t) = e.tau_int {
                tau_sum += t;
                tau_n += 1;
            }
        }
        out.set(
            obs,
            Estimate {
                mean,
                stderr: var.sqrt(),
                n_bins: total_bins,
                tau_int: (tau_n > 0).then(|| tau_sum / tau_n as f64),
            },
        );
    }
    out.bins = sets.iter().flat_map(|s| s.bins.iter().copied()).collect();
    let chains: usize = sets.iter().map(|s| s.diagnostics.chains).sum();
    out.diagnostics = QmcDiagnostics {
        path: first.diagnostics.path.clone(),
        final_cutoff: sets.iter().map(|s| s.diagnostics.final_cutoff).max().unwrap_or(0),
        mean_operators: sets.iter().map(|s| s.diagnostics.mean_operators).sum::<f64>() / sets.len() as f64,
        chains,
    };
    Ok(out)
}
