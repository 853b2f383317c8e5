//! Exact real-time evolution after a field quench.
//!
//! Each symmetry sector is evolved independently in the eigenbasis of the final
//! Hamiltonian, so there is no time-stepping error:
//! `O(t) = sum_q sum_mn rho_mn O_nm exp(-i (E_m - E_n) t) / Z` with `rho` the
//! initial density matrix expressed in the `H_f` eigenbasis of sector `q`.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ed::{EdLimits, EigenTable, ObservableKind, SectorBases, SectorSpectrum, DEGENERACY_RTOL};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, InitialState, ModelParams, QuenchSpec};
use crate::quench::{fmt, TfResult};

/// Largest imaginary part tolerated in a reported expectation value.
pub const IMAG_TOL: f64 = 1e-10;

struct Sector {
    energies: Vec<f64>,
    v_f: DMatrix<Complex64>,
    /// Unnormalized initial density matrix in the `H_f` eigenbasis.
    rho: DMatrix<Complex64>,
    spectrum: SectorSpectrum,
}

/// Initial ensemble and final spectrum of one quench, diagonalized once and
/// reused for every observable and time.
pub struct QuenchDynamics {
    pub l: usize,
    pub j: f64,
    pub quench: QuenchSpec,
    sectors: Vec<Sector>,
    z: f64,
    final_spectra: Vec<SectorSpectrum>,
}

impl std::fmt::Debug for QuenchDynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuenchDynamics")
            .field("l", &self.l)
            .field("quench", &self.quench)
            .field("sectors", &self.sectors.len())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub observable: ObservableKind,
    pub l: usize,
    pub j: f64,
    pub quench: QuenchSpec,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest dropped imaginary part.
    pub max_imag: f64,
}

/// Where the final temperature of a prediction came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TfSource {
    /// Exact inversion of the final-Hamiltonian `E(T)` at the conserved energy.
    EdExact,
    /// A solved point from the QMC pipeline.
    Imported { result: Box<TfResult> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStatePrediction {
    pub observable: ObservableKind,
    pub h_f: f64,
    /// Zero when the quench energy sits at the final ground energy.
    pub t_f: f64,
    pub value: f64,
    pub source: TfSource,
}

/// Tail statistics of a trajectory against the thermal prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailComparison {
    pub from_t: f64,
    pub tail_mean: f64,
    pub tail_std: f64,
    pub diagonal_ensemble: f64,
    pub prediction: f64,
    /// `diagonal_ensemble - prediction`
    pub eth_gap: f64,
}

fn check_observable(obs: ObservableKind) -> Result<()> {
    if !obs.is_flip_even() {
        return Err(Error::invalid(format!(
            "{obs:?} is not block diagonal in the spin-flip sectors"
        )));
    }
    Ok(())
}

/// Indices `[start, end)` of eigenvalue clusters closer than the degeneracy tolerance.
fn clusters(energies: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=energies.len() {
        let split = k == energies.len()
            || energies[k] - energies[k - 1] > DEGENERACY_RTOL * energies[k].abs().max(1.0);
        if split {
            out.push((start, k));
            start = k;
        }
    }
    out
}

impl QuenchDynamics {
    pub fn new(l: usize, j: f64, quench: QuenchSpec, limits: &EdLimits) -> Result<Self> {
        quench.validate()?;
        let lattice = build_lattice(l)?;
        let bases = SectorBases::new(&lattice, true, limits)?;
        let (initial, final_spectra) = rayon::join(
            || bases.diagonalize(&ModelParams::new(j, quench.h_i)?),
            || bases.diagonalize(&ModelParams::new(j, quench.h_f)?),
        );
        let (initial, final_spectra) = (initial?, final_spectra?);
        let e0 = initial
            .iter()
            .flat_map(|s| s.eigenvalues.iter().copied())
            .fold(f64::INFINITY, f64::min);
        let weight = |e: f64| match quench.initial {
            InitialState::Thermal { t } => (-(e - e0) / t).exp(),
            InitialState::GroundState => {
                if e - e0 <= DEGENERACY_RTOL * e0.abs().max(1.0) {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let sectors: Vec<Sector> = initial
            .par_iter()
            .zip(final_spectra.par_iter())
            .map(|(si, sf)| {
                debug_assert_eq!(si.label(), sf.label());
                let overlap = sf.eigenvectors.adjoint() * &si.eigenvectors;
                let mut scaled = overlap.clone();
                for (n, &e) in si.eigenvalues.iter().enumerate() {
                    let w = Complex64::new(weight(e), 0.0);
                    for z in scaled.column_mut(n).iter_mut() {
                        *z *= w;
                    }
                }
                let rho = scaled * overlap.adjoint();
                Sector {
                    energies: sf.eigenvalues.clone(),
                    v_f: sf.eigenvectors.clone(),
                    rho,
                    spectrum: sf.clone(),
                }
            })
            .collect();
        let z: f64 = initial
            .iter()
            .flat_map(|s| s.eigenvalues.iter().copied())
            .map(weight)
            .sum();
        Ok(Self {
            l,
            j,
            quench,
            sectors,
            z,
            final_spectra,
        })
    }

    /// `Tr rho_i`, fixed by construction.
    pub fn normalization(&self) -> f64 {
        self.z
    }

    /// `P_mn = rho_mn O_nm` in the `H_f` eigenbasis of each sector.
    fn products(&self, obs: ObservableKind) -> Result<Vec<DMatrix<Complex64>>> {
        check_observable(obs)?;
        self.sectors
            .par_iter()
            .map(|s| {
                let o = s.spectrum.operator_matrix(obs)?;
                let o_f = s.v_f.adjoint() * o * &s.v_f;
                Ok(s.rho.component_mul(&o_f.transpose()))
            })
            .collect()
    }

    pub fn evolve(&self, obs: ObservableKind, times: &[f64]) -> Result<TimeSeries> {
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times must be finite and strictly increasing"));
        }
        let products = self.products(obs)?;
        let raw: Vec<Complex64> = times
            .par_iter()
            .map(|&t| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, p) in self.sectors.iter().zip(&products) {
                    let phase: Vec<Complex64> = s.energies.iter().map(|&e| Complex64::from_polar(1.0, -e * t)).collect();
                    for n in 0..p.ncols() {
                        let mut col = Complex64::new(0.0, 0.0);
                        for (m, z) in p.column(n).iter().enumerate() {
                            col += phase[m] * z;
                        }
                        acc += col * phase[n].conj();
                    }
                }
                acc / self.z
            })
            .collect();
        let mut max_imag = 0.0f64;
        for z in &raw {
            max_imag = max_imag.max(z.im.abs());
            if z.im.abs() > IMAG_TOL * z.re.abs().max(1.0) {
                return Err(Error::Diagnostics(format!("non-real expectation {z} for {obs:?}")));
            }
        }
        Ok(TimeSeries {
            observable: obs,
            l: self.l,
            j: self.j,
            quench: self.quench,
            times: times.to_vec(),
            values: raw.iter().map(|z| z.re).collect(),
            max_imag,
        })
    }

    /// Infinite-time average; coherences inside a degenerate cluster of `H_f` survive.
    pub fn diagonal_ensemble(&self, obs: ObservableKind) -> Result<f64> {
        let products = self.products(obs)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (s, p) in self.sectors.iter().zip(&products) {
            for (a, b) in clusters(&s.energies) {
                for m in a..b {
                    for n in a..b {
                        acc += p[(m, n)];
                    }
                }
            }
        }
        Ok(acc.re / self.z)
    }

    /// Conserved post-quench energy `Tr(rho_i H_f) / Z`.
    pub fn quench_energy(&self) -> Result<f64> {
        self.diagonal_ensemble(ObservableKind::TotalEnergy)
    }

    /// Temperature at which the final Hamiltonian's thermal energy equals the
    /// conserved quench energy, found by bisection in `ln T`.
    pub fn exact_final_temperature(&self) -> Result<f64> {
        let table = EigenTable::new(&self.final_spectra, &[])?;
        let e_q = self.quench_energy()?;
        let e0 = table.ground_energy();
        if e_q - e0 <= 1e-12 * e0.abs().max(1.0) {
            return Ok(0.0);
        }
        let energy = |t: f64| table.thermal(t, ObservableKind::TotalEnergy);
        let (mut lo, mut hi) = (1e-3f64, 1e4f64);
        let (e_lo, e_hi) = (energy(lo)?, energy(hi)?);
        if !(e_lo <= e_q && e_q <= e_hi) {
            return Err(Error::BracketFailure {
                e_q,
                t_lo: lo,
                t_hi: hi,
                e_lo,
                e_hi,
            });
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if mid <= lo || mid >= hi {
                break;
            }
            if energy(mid)? < e_q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo * hi).sqrt())
    }

    /// Thermal value of `obs` for `H_f` at the final temperature.
    pub fn steady_state_prediction(&self, obs: ObservableKind, source: TfSource) -> Result<SteadyStatePrediction> {
        check_observable(obs)?;
        let t_f = match &source {
            TfSource::EdExact => self.exact_final_temperature()?,
            TfSource::Imported { result } => {
                if result.h_f != self.quench.h_f {
                    return Err(Error::invalid(format!(
                        "imported T_f is for h_f = {}, quench has h_f = {}",
                        result.h_f, self.quench.h_f
                    )));
                }
                result.t_f
            }
        };
        let table = EigenTable::new(&self.final_spectra, &[obs])?;
        let value = if t_f > 0.0 {
            table.thermal(t_f, obs)?
        } else {
            table.ground_state(obs)?.value
        };
        Ok(SteadyStatePrediction {
            observable: obs,
            h_f: self.quench.h_f,
            t_f,
            value,
            source,
        })
    }

    /// Tail of `series` from `from_t` on, set against the diagonal ensemble and `prediction`.
    pub fn compare_tail(&self, series: &TimeSeries, from_t: f64, prediction: &SteadyStatePrediction) -> Result<TailComparison> {
        if series.observable != prediction.observable {
            return Err(Error::invalid("series and prediction observables differ"));
        }
        let tail: Vec<f64> = series
            .times
            .iter()
            .zip(&series.values)
            .filter(|(t, _)| **t >= from_t)
            .map(|(_, v)| *v)
            .collect();
        if tail.is_empty() {
            return Err(Error::invalid(format!("no samples at t >= {from_t}")));
        }
        let n = tail.len() as f64;
        let mean = tail.iter().sum::<f64>() / n;
        let std = (tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let de = self.diagonal_ensemble(series.observable)?;
        Ok(TailComparison {
            from_t,
            tail_mean: mean,
            tail_std: std,
            diagonal_ensemble: de,
            prediction: prediction.value,
            eth_gap: de - prediction.value,
        })
    }
}

impl TimeSeries {
    /// Running time average `(1/tau) int_0^tau O dt` by the trapezoid rule on the sampled grid.
    pub fn running_mean(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut area = 0.0;
        for k in 0..self.values.len() {
            if k > 0 {
                area += 0.5 * (self.values[k] + self.values[k - 1]) * (self.times[k] - self.times[k - 1]);
            }
            let span = self.times[k] - self.times[0];
            out.push(if span > 0.0 { area / span } else { self.values[0] });
        }
        out
    }

    /// Columns `schema_version,t,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["schema_version", "t", "value"])?;
        let v = crate::io::SCHEMA_VERSION.to_string();
        for (t, x) in self.times.iter().zip(&self.values) {
            w.write_record([v.clone(), fmt(*t), fmt(*x)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `n` evenly spaced times on `[0, t_max]`.
pub fn time_grid(t_max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
}
