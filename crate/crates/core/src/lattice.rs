//! Periodic L x L square lattice and the transverse-field Ising model parameters.
//!
//! Sites are indexed row-major, `index = y * L + x`. Bonds are listed per site
//! in ascending index order, the rightward edge before the upward edge, so the
//! bond list is a pure function of `L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    l: usize,
    bonds: Vec<(usize, usize)>,
    neighbors: Vec<[usize; 4]>,
    degenerate_torus: bool,
}

impl LatticeSpec {
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n_sites(&self) -> usize {
        self.l * self.l
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    /// The four bond partners of `site` (right, up, left, down). On the 2-torus
    /// left/right and up/down coincide, matching the doubled bond list.
    pub fn neighbors(&self, site: usize) -> &[usize; 4] {
        &self.neighbors[site]
    }

    /// Set for `L = 2`, where every nearest-neighbour pair is joined by two edges.
    pub fn is_degenerate_torus(&self) -> bool {
        self.degenerate_torus
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        (y % self.l) * self.l + (x % self.l)
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.l, site / self.l)
    }

    /// Sum of `s_i s_j` over the bond list for a configuration of `+-1` spins.
    pub fn zz_bond_sum(&self, spins: &[i8]) -> i64 {
        self.bonds
            .iter()
            .map(|&(a, b)| (spins[a] * spins[b]) as i64)
            .sum()
    }

    /// Site permutations for each of the `L^2` translations.
    ///
    /// Entry `dy * L + dx` maps site `(x, y)` to `(x + dx, y + dy)`; entry 0 is
    /// the identity.
    pub fn translation_orbits(&self) -> Vec<Vec<usize>> {
        let l = self.l;
        let mut table = Vec::with_capacity(l * l);
        for dy in 0..l {
            for dx in 0..l {
                let perm = (0..self.n_sites())
                    .map(|s| {
                        let (x, y) = self.coords(s);
                        self.site(x + dx, y + dy)
                    })
                    .collect();
                table.push(perm);
            }
        }
        table
    }
}

/// Builds the periodic `L x L` lattice. `L = 2` is accepted and flagged as a
/// degenerate torus.
pub fn build_lattice(l: usize) -> Result<LatticeSpec> {
    if l < 2 {
        return Err(Error::invalid(format!("lattice size L must be >= 2, got {l}")));
    }
    let n = l * l;
    let mut bonds = Vec::with_capacity(2 * n);
    let mut neighbors = Vec::with_capacity(n);
    for s in 0..n {
        let (x, y) = (s % l, s / l);
        let right = y * l + (x + 1) % l;
        let up = ((y + 1) % l) * l + x;
        let left = y * l + (x + l - 1) % l;
        let down = ((y + l - 1) % l) * l + x;
        bonds.push((s, right));
        bonds.push((s, up));
        neighbors.push([right, up, left, down]);
    }
    Ok(LatticeSpec {
        l,
        bonds,
        neighbors,
        degenerate_torus: l == 2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub j: f64,
    pub h: f64,
}

impl ModelParams {
    pub fn new(j: f64, h: f64) -> Result<Self> {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!("field h must be finite and >= 0, got {h}")));
        }
        if !j.is_finite() {
            return Err(Error::invalid(format!("coupling J must be finite, got {j}")));
        }
        Ok(Self { j, h })
    }

    /// Physics runs fix `J = 1`.
    pub fn with_field(h: f64) -> Result<Self> {
        Self::new(1.0, h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalPoint {
    pub h: f64,
    pub t: f64,
}

impl ThermalPoint {
    pub fn new(h: f64, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("temperature T must be > 0, got {t}")));
        }
        if !(h >= 0.0) {
            return Err(Error::invalid(format!("field h must be >= 0, got {h}")));
        }
        Ok(Self { h, t })
    }
}

/// Initial ensemble of a quench.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    Thermal { t: f64 },
    GroundState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchSpec {
    pub h_i: f64,
    pub initial: InitialState,
    pub h_f: f64,
}

impl QuenchSpec {
    pub fn thermal(h_i: f64, t_i: f64, h_f: f64) -> Result<Self> {
        let q = Self {
            h_i,
            initial: InitialState::Thermal { t: t_i },
            h_f,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn ground_state(h_i: f64, h_f: f64) -> Result<Self> {
        let q = Self {
            h_i,
            initial: InitialState::GroundState,
            h_f,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_i >= 0.0) || !(self.h_f >= 0.0) {
            return Err(Error::invalid("quench fields h_i, h_f must be >= 0"));
        }
        if let InitialState::Thermal { t } = self.initial {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::invalid(format!("initial temperature T_i must be > 0, got {t}")));
            }
        }
        Ok(())
    }

    pub fn t_i(&self) -> Option<f64> {
        match self.initial {
            InitialState::Thermal { t } => Some(t),
            InitialState::GroundState => None,
        }
    }
}

/// Classical ferromagnetic ground energy `-J * n_bonds`; only defined at `h = 0`.
pub fn classical_ground_energy(lattice: &LatticeSpec, params: &ModelParams) -> Result<f64> {
    if params.h != 0.0 {
        return Err(Error::invalid(format!(
            "classical ground energy requires h = 0, got h = {}",
            params.h
        )));
    }
    Ok(-params.j * lattice.n_bonds() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn degrees(lat: &LatticeSpec) -> Vec<usize> {
        let mut d = vec![0; lat.n_sites()];
        for &(a, b) in lat.bonds() {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    #[test]
    fn counts() {
        let l3 = build_lattice(3).unwrap();
        assert_eq!(l3.n_sites(), 9);
        assert_eq!(l3.n_bonds(), 18);
        assert!(degrees(&l3).iter().all(|&d| d == 4));
        assert!(!l3.is_degenerate_torus());

        let l24 = build_lattice(24).unwrap();
        assert_eq!(l24.n_sites(), 576);
        assert_eq!(l24.n_bonds(), 1152);
    }

    #[test]
    fn two_torus_doubles_edges() {
        let l2 = build_lattice(2).unwrap();
        assert_eq!(l2.n_sites(), 4);
        assert_eq!(l2.n_bonds(), 8);
        assert!(l2.is_degenerate_torus());
        let mut pairs = std::collections::HashMap::new();
        for &(a, b) in l2.bonds() {
            *pairs.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
        assert_eq!(pairs.len(), 4);
        assert!(pairs.values().all(|&c| c == 2));
    }

    #[test]
    fn rejects_small() {
        assert!(matches!(build_lattice(1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_lattice(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bond_order_row_major() {
        let l = build_lattice(3).unwrap();
        assert_eq!(&l.bonds()[..4], &[(0, 1), (0, 3), (1, 2), (1, 4)]);
        assert_eq!(l.bonds()[17], (8, 2));
        assert_eq!(build_lattice(5).unwrap(), build_lattice(5).unwrap());
    }

    #[test]
    fn ground_energy() {
        let p = ModelParams::new(1.0, 0.0).unwrap();
        assert_eq!(classical_ground_energy(&build_lattice(3).unwrap(), &p).unwrap(), -18.0);
        assert_eq!(classical_ground_energy(&build_lattice(24).unwrap(), &p).unwrap(), -1152.0);
        let p2 = ModelParams::new(2.0, 0.0).unwrap();
        assert_eq!(classical_ground_energy(&build_lattice(4).unwrap(), &p2).unwrap(), -64.0);
        let ph = ModelParams::new(1.0, 0.5).unwrap();
        assert!(classical_ground_energy(&build_lattice(3).unwrap(), &ph).is_err());
    }

    fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
        b.iter().map(|&s| a[s]).collect()
    }

    #[test]
    fn translation_group() {
        for l in 2..=5 {
            let lat = build_lattice(l).unwrap();
            let table = lat.translation_orbits();
            assert_eq!(table.len(), l * l);
            let id: Vec<usize> = (0..l * l).collect();
            assert_eq!(table[0], id);
            // each element has order dividing L
            for p in &table {
                let mut acc = id.clone();
                for _ in 0..l {
                    acc = compose(p, &acc);
                }
                assert_eq!(acc, id);
            }
            // composing all translations gives the identity (abelian group of exponent L)
            let all = table.iter().fold(id.clone(), |acc, p| compose(p, &acc));
            let expected = if l % 2 == 0 { table[l / 2 * l + l / 2].clone() } else { id.clone() };
            // the product of all elements of Z_L x Z_L is the identity for odd L and the
            // (L/2, L/2) shift's square-free part for even L; in both cases it is an involution
            assert_eq!(compose(&all, &all), id);
            if l % 2 == 1 {
                assert_eq!(all, expected);
            }
            // closure and bond invariance
            let set: HashSet<Vec<usize>> = table.iter().cloned().collect();
            let edges: HashSet<(usize, usize)> =
                lat.bonds().iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
            for p in &table {
                for q in &table {
                    assert!(set.contains(&compose(p, q)));
                }
                for &(a, b) in lat.bonds() {
                    let (x, y) = (p[a], p[b]);
                    assert!(edges.contains(&(x.min(y), x.max(y))));
                }
            }
        }
    }

    #[test]
    fn l2_is_klein_group() {
        let lat = build_lattice(2).unwrap();
        let id: Vec<usize> = (0..4).collect();
        for p in lat.translation_orbits() {
            assert_eq!(compose(&p, &p), id);
        }
    }

    #[test]
    fn thermal_point_validation() {
        assert!(ThermalPoint::new(1.0, 0.0).is_err());
        assert!(ThermalPoint::new(1.0, -1.0).is_err());
        assert!(ThermalPoint::new(-1.0, 1.0).is_err());
        assert!(QuenchSpec::thermal(1.0, 0.0, 2.0).is_err());
        assert!(QuenchSpec::ground_state(0.0, 2.0).is_ok());
    }
}
