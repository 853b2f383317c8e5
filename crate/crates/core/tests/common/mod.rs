//! Brute-force reference model shared by the integration tests.
//!
//! Built straight from bit operations on the full 2^N basis with no symmetry
//! reduction and none of the library's ED code, so agreement with it is an
//! independent check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Nearest-neighbour bonds of the L x L torus, each counted once.
pub fn torus_bonds(l: usize) -> Vec<(usize, usize)> {
    let mut bonds = Vec::with_capacity(2 * l * l);
    for y in 0..l {
        for x in 0..l {
            let s = y * l + x;
            bonds.push((s, y * l + (x + 1) % l));
            bonds.push((s, ((y + 1) % l) * l + x));
        }
    }
    bonds
}

fn spin(state: usize, site: usize) -> f64 {
    if state >> site & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Diagonal of `sum_<ij> s^z_i s^z_j` in the computational basis.
pub fn zz_diagonal(l: usize) -> Vec<f64> {
    let bonds = torus_bonds(l);
    (0..1usize << (l * l))
        .map(|s| bonds.iter().map(|&(a, b)| spin(s, a) * spin(s, b)).sum())
        .collect()
}

/// Diagonal of `(sum_i s^z_i)`.
pub fn mz_diagonal(l: usize) -> Vec<f64> {
    let n = l * l;
    (0..1usize << n).map(|s| (0..n).map(|i| spin(s, i)).sum()).collect()
}

/// Dense `sum_i s^x_i`.
pub fn x_matrix(l: usize) -> DMatrix<f64> {
    let n = l * l;
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        for i in 0..n {
            m[(s ^ (1 << i), s)] += 1.0;
        }
    }
    m
}

/// Dense `-J sum s^z s^z - h sum s^x`.
pub fn hamiltonian(l: usize, j: f64, h: f64) -> DMatrix<f64> {
    let mut m = x_matrix(l) * -h;
    for (s, zz) in zz_diagonal(l).into_iter().enumerate() {
        m[(s, s)] -= j * zz;
    }
    m
}

/// Thermal expectation values of the standard observables.
#[derive(Debug, Clone, Copy)]
pub struct Thermal {
    pub energy: f64,
    pub zz: f64,
    pub x: f64,
    pub m2: f64,
    pub m4: f64,
}

impl Thermal {
    pub fn binder(&self) -> f64 {
        1.0 - self.m4 / (3.0 * self.m2 * self.m2)
    }
}

/// Diagonalized model with per-eigenstate observable values.
pub struct Oracle {
    pub l: usize,
    pub j: f64,
    pub h: f64,
    pub eig: SymmetricEigen<f64, nalgebra::Dyn>,
    zz: Vec<f64>,
    x: Vec<f64>,
    m2: Vec<f64>,
    m4: Vec<f64>,
}

impl Oracle {
    pub fn new(l: usize, j: f64, h: f64) -> Self {
        let eig = hamiltonian(l, j, h).symmetric_eigen();
        let n = (l * l) as f64;
        let zz_d = DVector::from_vec(zz_diagonal(l));
        let mz = mz_diagonal(l);
        let m2_d = DVector::from_iterator(mz.len(), mz.iter().map(|m| (m / n).powi(2)));
        let m4_d = DVector::from_iterator(mz.len(), mz.iter().map(|m| (m / n).powi(4)));
        let xm = x_matrix(l);
        let v = &eig.eigenvectors;
        let dim = v.ncols();
        let diag_exp = |d: &DVector<f64>| -> Vec<f64> {
            (0..dim)
                .map(|k| v.column(k).iter().zip(d.iter()).map(|(c, w)| c * c * w).sum())
                .collect()
        };
        let xv = &xm * v;
        let x = (0..dim).map(|k| v.column(k).dot(&xv.column(k))).collect();
        Self {
            l,
            j,
            h,
            zz: diag_exp(&zz_d),
            m2: diag_exp(&m2_d),
            m4: diag_exp(&m4_d),
            x,
            eig,
        }
    }

    pub fn ground_energy(&self) -> f64 {
        self.eig.eigenvalues.min()
    }

    pub fn boltzmann(&self, t: f64) -> Vec<f64> {
        let e0 = self.ground_energy();
        let w: Vec<f64> = self.eig.eigenvalues.iter().map(|e| (-(e - e0) / t).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    pub fn thermal(&self, t: f64) -> Thermal {
        let p = self.boltzmann(t);
        let avg = |v: &[f64]| p.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        Thermal {
            energy: avg(self.eig.eigenvalues.as_slice()),
            zz: avg(&self.zz),
            x: avg(&self.x),
            m2: avg(&self.m2),
            m4: avg(&self.m4),
        }
    }

    /// Thermal density matrix in the computational basis.
    pub fn density_matrix(&self, t: f64) -> DMatrix<f64> {
        let p = DVector::from_vec(self.boltzmann(t));
        let v = &self.eig.eigenvectors;
        v * DMatrix::from_diagonal(&p) * v.transpose()
    }
}

/// Temperature with `E(T) = target`, by bisection in log T.
pub fn invert_energy(oracle: &Oracle, target: f64) -> f64 {
    let (mut lo, mut hi) = (1e-3f64.ln(), 1e4f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if oracle.thermal(mid.exp()).energy < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}
