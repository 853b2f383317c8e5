//! Exact diagonalization of the transverse-field Ising model.
//!
//! The Hamiltonian `H = -J sum_<ij> s^z_i s^z_j - h sum_i s^x_i` is block diagonal in
//! the translation x spin-flip sectors; every observable handled here is even under
//! both, so thermal and real-time expectations decompose sector by sector.

mod basis;
pub mod cache;
mod eigh;

pub use eigh::eigh;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, ModelParams};

pub use basis::{SectorBasis, SectorLabel, SymmetryTable};

/// Site-count limits for exact diagonalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdLimits {
    pub max_sites_symmetric: usize,
    pub max_sites_dense: usize,
}

impl Default for EdLimits {
    fn default() -> Self {
        Self {
            max_sites_symmetric: 16,
            max_sites_dense: 14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    Identity,
    TotalEnergy,
    /// `sum_<ij> s^z_i s^z_j`
    ZzBondSum,
    /// `sum_i s^x_i`
    XSum,
    /// `(sum_i s^z_i)^2 / N^2`
    M2,
    /// `(sum_i s^z_i)^4 / N^4`
    M4,
    /// `sum_<ij> s^z_i s^z_j / N`
    Cnn,
    /// `sum_i s^z_i`; odd under spin flip, so only available in the full basis.
    ZSum,
}

impl ObservableKind {
    pub fn is_flip_even(self) -> bool {
        !matches!(self, ObservableKind::ZSum)
    }
}

#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub basis: Arc<SectorBasis>,
    pub params: ModelParams,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the sector basis.
    pub eigenvectors: DMatrix<Complex64>,
    pub n_sites: usize,
}

impl SectorSpectrum {
    pub fn label(&self) -> SectorLabel {
        self.basis.label
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Largest deviation of `V^dagger V` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let v = &self.eigenvectors;
        let g = v.adjoint() * v;
        let mut worst = 0.0f64;
        for ((r, c), z) in g.iter().enumerate().map(|(k, z)| ((k % g.nrows(), k / g.nrows()), z)) {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((z - Complex64::new(target, 0.0)).norm());
        }
        worst
    }

    /// Operator matrix in the sector basis.
    pub fn operator_matrix(&self, obs: ObservableKind) -> Result<DMatrix<Complex64>> {
        operator_matrix(&self.basis, &self.params, self.n_sites, obs)
    }

    /// `<n|O|n>` for every eigenvector `n`.
    pub fn eigen_expectations(&self, obs: ObservableKind) -> Result<Vec<f64>> {
        let b = &self.basis;
        let v = &self.eigenvectors;
        let dim = b.dim();
        let diag_weighted = |vals: &dyn Fn(usize) -> f64| -> Vec<f64> {
            (0..dim)
                .map(|n| {
                    v.column(n)
                        .iter()
                        .enumerate()
                        .map(|(a, z)| z.norm_sqr() * vals(a))
                        .sum()
                })
                .collect()
        };
        let n = self.n_sites as f64;
        Ok(match obs {
            ObservableKind::Identity => vec![1.0; dim],
            ObservableKind::TotalEnergy => self.eigenvalues.clone(),
            ObservableKind::ZzBondSum => diag_weighted(&|a| b.zz[a]),
            ObservableKind::Cnn => diag_weighted(&|a| b.zz[a] / n),
            ObservableKind::M2 => diag_weighted(&|a| (b.mz[a] / n).powi(2)),
            ObservableKind::M4 => diag_weighted(&|a| (b.mz[a] / n).powi(4)),
            ObservableKind::ZSum => {
                if b.label != SectorLabel::Full {
                    return Err(Error::invalid(
                        "sum of sigma^z is odd under spin flip and has no block in a parity sector",
                    ));
                }
                diag_weighted(&|a| b.mz[a])
            }
            ObservableKind::XSum => {
                let mut out = vec![0.0; dim];
                for (k, slot) in out.iter_mut().enumerate() {
                    let col = v.column(k);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &(r, c, val) in &b.x_entries {
                        acc += col[r as usize].conj() * val * col[c as usize];
                    }
                    *slot = acc.re;
                }
                out
            }
        })
    }
}

pub fn operator_matrix(
    basis: &SectorBasis,
    params: &ModelParams,
    n_sites: usize,
    obs: ObservableKind,
) -> Result<DMatrix<Complex64>> {
    let dim = basis.dim();
    let n = n_sites as f64;
    let diag = |f: &dyn Fn(usize) -> f64| {
        DMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                Complex64::new(f(r), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    };
    let x = || {
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for &(r, c, v) in &basis.x_entries {
            m[(r as usize, c as usize)] += v;
        }
        m
    };
    Ok(match obs {
        ObservableKind::Identity => diag(&|_| 1.0),
        ObservableKind::ZzBondSum => diag(&|a| basis.zz[a]),
        ObservableKind::Cnn => diag(&|a| basis.zz[a] / n),
        ObservableKind::M2 => diag(&|a| (basis.mz[a] / n).powi(2)),
        ObservableKind::M4 => diag(&|a| (basis.mz[a] / n).powi(4)),
        ObservableKind::XSum => x(),
        ObservableKind::TotalEnergy => {
            let mut m = x() * Complex64::new(-params.h, 0.0);
            for a in 0..dim {
                m[(a, a)] += -params.j * basis.zz[a];
            }
            m
        }
        ObservableKind::ZSum => {
            if basis.label != SectorLabel::Full {
                return Err(Error::invalid(
                    "sum of sigma^z is not block diagonal in the spin-flip sectors",
                ));
            }
            diag(&|a| basis.mz[a])
        }
    })
}

/// Sector bases for a lattice; the expensive orbit enumeration is shared by every
/// field value diagonalized on the same lattice.
#[derive(Debug, Clone)]
pub struct SectorBases {
    pub lattice: LatticeSpec,
    pub use_symmetry: bool,
    pub bases: Vec<Arc<SectorBasis>>,
}

impl SectorBases {
    pub fn new(lattice: &LatticeSpec, use_symmetry: bool, limits: &EdLimits) -> Result<Self> {
        let n = lattice.n_sites();
        if use_symmetry && n > limits.max_sites_symmetric {
            return Err(Error::ResourceLimit {
                what: "ED sites (symmetry-reduced)",
                value: n,
                limit: limits.max_sites_symmetric,
            });
        }
        if !use_symmetry && n > limits.max_sites_dense {
            return Err(Error::ResourceLimit {
                what: "ED sites (dense)",
                value: n,
                limit: limits.max_sites_dense,
            });
        }
        let bases = if use_symmetry {
            let table = SymmetryTable::new(lattice);
            table
                .labels()
                .into_par_iter()
                .map(|lab| SectorBasis::momentum(lattice, &table, lab))
                .filter(|b| b.dim() > 0)
                .map(Arc::new)
                .collect()
        } else {
            vec![Arc::new(SectorBasis::full(lattice))]
        };
        Ok(Self {
            lattice: lattice.clone(),
            use_symmetry,
            bases,
        })
    }

    pub fn diagonalize(&self, params: &ModelParams) -> Result<Vec<SectorSpectrum>> {
        let n_sites = self.lattice.n_sites();
        self.bases
            .par_iter()
            .map(|b| {
                let h = operator_matrix(b, params, n_sites, ObservableKind::TotalEnergy)?;
                let (eigenvalues, eigenvectors) = eigh(h)?;
                Ok(SectorSpectrum {
                    basis: Arc::clone(b),
                    params: *params,
                    eigenvalues,
                    eigenvectors,
                    n_sites,
                })
            })
            .collect()
    }
}

/// Full spectrum of the model, optionally resolved into symmetry sectors.
pub fn diagonalize(
    lattice: &LatticeSpec,
    params: &ModelParams,
    use_symmetry: bool,
    limits: &EdLimits,
) -> Result<Vec<SectorSpectrum>> {
    SectorBases::new(lattice, use_symmetry, limits)?.diagonalize(params)
}

/// Eigenvalues and per-eigenstate observable values flattened over all sectors;
/// enough to evaluate any thermal or ground-state average cheaply.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenTable {
    pub energies: Vec<f64>,
    pub values: BTreeMap<ObservableKind, Vec<f64>>,
}

impl EigenTable {
    pub fn new(spectra: &[SectorSpectrum], observables: &[ObservableKind]) -> Result<Self> {
        let energies: Vec<f64> = spectra.iter().flat_map(|s| s.eigenvalues.iter().copied()).collect();
        let mut values = BTreeMap::new();
        for &obs in observables {
            let mut col = Vec::with_capacity(energies.len());
            for s in spectra {
                col.extend(s.eigen_expectations(obs)?);
            }
            values.insert(obs, col);
        }
        Ok(Self { energies, values })
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn column(&self, obs: ObservableKind) -> Result<&[f64]> {
        if obs == ObservableKind::TotalEnergy {
            return Ok(&self.energies);
        }
        self.values
            .get(&obs)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("observable {obs:?} not tabulated")))
    }

    /// Boltzmann weights normalised to sum 1, computed after shifting by the
    /// ground energy so that no exponent is positive.
    fn weights(&self, t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("temperature must be > 0, got {t}")));
        }
        let e0 = self.ground_energy();
        let mut w: Vec<f64> = self.energies.iter().map(|&e| (-(e - e0) / t).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        Ok(w)
    }

    pub fn thermal(&self, t: f64, obs: ObservableKind) -> Result<f64> {
        if obs == ObservableKind::Identity {
            let w = self.weights(t)?;
            return Ok(w.iter().sum());
        }
        let col = self.column(obs)?;
        let w = self.weights(t)?;
        Ok(w.iter().zip(col).map(|(a, b)| a * b).sum())
    }

    /// `C = (<E^2> - <E>^2) / T^2`, i.e. `dE/dT`.
    pub fn heat_capacity(&self, t: f64) -> Result<f64> {
        let w = self.weights(t)?;
        let e1: f64 = w.iter().zip(&self.energies).map(|(a, e)| a * e).sum();
        let var: f64 = w.iter().zip(&self.energies).map(|(a, e)| a * (e - e1).powi(2)).sum();
        Ok(var / (t * t))
    }

    /// Log of the partition function.
    pub fn log_partition(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("temperature must be > 0, got {t}")));
        }
        let e0 = self.ground_energy();
        let z: f64 = self.energies.iter().map(|&e| (-(e - e0) / t).exp()).sum();
        Ok(z.ln() - e0 / t)
    }

    pub fn ground_state(&self, obs: ObservableKind) -> Result<GroundStateValue> {
        let e0 = self.ground_energy();
        let tol = DEGENERACY_RTOL * e0.abs().max(1.0);
        let col = if obs == ObservableKind::Identity {
            None
        } else {
            Some(self.column(obs)?)
        };
        let mut sum = 0.0;
        let mut count = 0;
        for (k, &e) in self.energies.iter().enumerate() {
            if e - e0 <= tol {
                sum += col.map_or(1.0, |c| c[k]);
                count += 1;
            }
        }
        Ok(GroundStateValue {
            value: sum / count as f64,
            energy: e0,
            degeneracy: count,
        })
    }
}

/// Relative energy gap below which eigenvalues are treated as degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateValue {
    pub value: f64,
    pub energy: f64,
    pub degeneracy: usize,
}

impl GroundStateValue {
    pub fn is_degenerate(&self) -> bool {
        self.degeneracy > 1
    }
}

pub fn thermal_expectation(spectra: &[SectorSpectrum], t: f64, obs: ObservableKind) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("temperature must be > 0, got {t}")));
    }
    EigenTable::new(spectra, &[obs])?.thermal(t, obs)
}

/// Uniform average over an orthonormal basis of the (possibly degenerate) ground space.
pub fn ground_state_expectation(spectra: &[SectorSpectrum], obs: ObservableKind) -> Result<GroundStateValue> {
    EigenTable::new(spectra, &[obs])?.ground_state(obs)
}

/// Exact `E(T)` on a temperature grid.
pub fn energy_vs_temperature(spectra: &[SectorSpectrum], t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let table = EigenTable::new(spectra, &[])?;
    t_grid
        .iter()
        .map(|&t| Ok((t, table.thermal(t, ObservableKind::TotalEnergy)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    fn spectra(l: usize, j: f64, h: f64, sym: bool) -> Vec<SectorSpectrum> {
        let lat = build_lattice(l).unwrap();
        diagonalize(&lat, &ModelParams::new(j, h).unwrap(), sym, &EdLimits::default()).unwrap()
    }

    #[test]
    fn decoupled_spins_l2() {
        for sym in [false, true] {
            let sp = spectra(2, 0.0, 1.0, sym);
            let mut e: Vec<f64> = sp.iter().flat_map(|s| s.eigenvalues.clone()).collect();
            e.sort_by(f64::total_cmp);
            let expected = [-4., -2., -2., -2., -2., 0., 0., 0., 0., 0., 0., 2., 2., 2., 2., 4.];
            for (a, b) in e.iter().zip(expected) {
                assert!((a - b).abs() < 1e-10, "{e:?}");
            }
        }
    }

    #[test]
    fn resource_limit() {
        let lat = build_lattice(5).unwrap();
        let err = diagonalize(&lat, &ModelParams::new(1.0, 1.0).unwrap(), true, &EdLimits::default())
            .unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { limit: 16, .. }), "{err}");
        let lat4 = build_lattice(4).unwrap();
        let err = diagonalize(&lat4, &ModelParams::new(1.0, 1.0).unwrap(), false, &EdLimits::default())
            .unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { limit: 14, .. }));
    }

    #[test]
    fn x_sum_decoupled() {
        let sp = spectra(3, 0.0, 1.3, true);
        for t in [0.3, 1.0, 4.0] {
            let v = thermal_expectation(&sp, t, ObservableKind::XSum).unwrap();
            assert!((v - 9.0 * (1.3f64 / t).tanh()).abs() < 1e-10);
        }
    }

    #[test]
    fn infinite_temperature_energy() {
        let sp = spectra(3, 1.0, 2.0, true);
        let e = thermal_expectation(&sp, 1e6, ObservableKind::TotalEnergy).unwrap();
        assert!(e.abs() / 9.0 < 1e-3);
        let one = thermal_expectation(&sp, 0.01, ObservableKind::Identity).unwrap();
        assert!((one - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvectors_orthonormal() {
        for s in spectra(3, 1.0, 2.0, true) {
            assert!(s.orthonormality_error() < 1e-10);
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn ground_state_limits() {
        let sp = spectra(3, 1.0, 0.0, true);
        let g = ground_state_expectation(&sp, ObservableKind::ZzBondSum).unwrap();
        assert!((g.value - 18.0).abs() < 1e-10);
        assert_eq!(g.degeneracy, 2);
        assert!(g.is_degenerate());

        let sp = spectra(3, 1.0, 1e3, true);
        let g = ground_state_expectation(&sp, ObservableKind::XSum).unwrap();
        assert!((g.value - 9.0).abs() < 1e-3);
        assert!(!g.is_degenerate());
    }

    #[test]
    fn zsum_only_in_full_basis() {
        let sym = spectra(3, 1.0, 1.0, true);
        assert!(thermal_expectation(&sym, 1.0, ObservableKind::ZSum).is_err());
        let full = spectra(3, 1.0, 1.0, false);
        let z = thermal_expectation(&full, 1.0, ObservableKind::ZSum).unwrap();
        // the ordered doublet is split by ~1e-8, so roundoff mixes it at ~1e-7
        assert!(z.abs() < 1e-6, "{z}");
    }

    #[test]
    fn energy_curve_monotone_and_low_t_limit() {
        let sp = spectra(3, 1.0, 2.0, true);
        let grid: Vec<f64> = (1..200).map(|k| 0.02 * k as f64).collect();
        let curve = energy_vs_temperature(&sp, &grid).unwrap();
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1 + 1e-12));
        let e0 = EigenTable::new(&sp, &[]).unwrap().ground_energy();
        let low = energy_vs_temperature(&sp, &[1e-3]).unwrap()[0].1;
        assert!((low - e0).abs() < 1e-9);
        assert!(thermal_expectation(&sp, 0.0, ObservableKind::TotalEnergy).is_err());
    }
}
