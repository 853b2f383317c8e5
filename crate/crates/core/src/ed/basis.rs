//! Symmetry-adapted bases for the translation x global-spin-flip group.
//!
//! Basis states are bitstrings over the sites; bit `i` set means `sigma^z_i = -1`.
//! A sector state is `|r, q> = (|G| |Stab(r)|)^{-1/2} sum_g chi_q(g)^* g|r>` built
//! on the orbit representative `r` (smallest bitstring in the orbit).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lattice::LatticeSpec;

/// Sector quantum numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectorLabel {
    /// Unreduced `2^N` basis.
    Full,
    /// Momentum `2 pi (kx, ky) / L` and spin-flip parity `+-1`.
    Momentum { kx: usize, ky: usize, parity: i8 },
}

impl std::fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SectorLabel::Full => write!(f, "full"),
            SectorLabel::Momentum { kx, ky, parity } => {
                write!(f, "k=({kx},{ky}),p={}", if *parity > 0 { "+" } else { "-" })
            }
        }
    }
}

/// Orbit bookkeeping shared by all sectors of one lattice.
#[derive(Debug)]
pub struct SymmetryTable {
    l: usize,
    n_sites: usize,
    /// Group element `g = flip * L^2 + dy * L + dx` as a site permutation plus flip bit.
    perms: Vec<Vec<usize>>,
    /// Orbit representative of each state.
    rep: Vec<u32>,
    /// Element taking the representative to the state: `state = g . rep`.
    elem: Vec<u16>,
    /// Stabiliser size, stored at representative indices only.
    stab: Vec<u16>,
}

impl SymmetryTable {
    pub fn new(lattice: &LatticeSpec) -> Self {
        let l = lattice.l();
        let n = lattice.n_sites();
        let translations = lattice.translation_orbits();
        let n_states = 1usize << n;
        let all = (n_states - 1) as u32;
        let group_order = 2 * l * l;
        let mut rep = vec![u32::MAX; n_states];
        let mut elem = vec![0u16; n_states];
        let mut stab = vec![0u16; n_states];
        for s in 0..n_states as u32 {
            if rep[s as usize] != u32::MAX {
                continue;
            }
            // `s` is the smallest unvisited state, hence the minimum of its orbit.
            let mut count = 0u16;
            for g in 0..group_order {
                let (t, flip) = (g % (l * l), g >= l * l);
                let mut img = permute_bits(s, &translations[t]);
                if flip {
                    img ^= all;
                }
                if img == s {
                    count += 1;
                }
                if rep[img as usize] == u32::MAX {
                    rep[img as usize] = s;
                    elem[img as usize] = g as u16;
                }
            }
            stab[s as usize] = count;
        }
        Self {
            l,
            n_sites: n,
            perms: translations,
            rep,
            elem,
            stab,
        }
    }

    pub fn group_order(&self) -> usize {
        2 * self.l * self.l
    }

    /// Character of group element `g` in sector `(kx, ky, parity)`.
    pub fn character(&self, g: usize, kx: usize, ky: usize, parity: i8) -> Complex64 {
        let ll = self.l * self.l;
        let t = g % ll;
        let (dx, dy) = (t % self.l, t / self.l);
        let phase = -2.0 * std::f64::consts::PI * ((kx * dx + ky * dy) as f64) / self.l as f64;
        let sign = if g >= ll && parity < 0 { -1.0 } else { 1.0 };
        Complex64::from_polar(sign, phase)
    }

    fn apply(&self, g: usize, s: u32) -> u32 {
        let ll = self.l * self.l;
        let mut img = permute_bits(s, &self.perms[g % ll]);
        if g >= ll {
            img ^= ((1u64 << self.n_sites) - 1) as u32;
        }
        img
    }

    /// All sector labels, momentum-major then parity `+1` before `-1`.
    pub fn labels(&self) -> Vec<SectorLabel> {
        let mut out = Vec::with_capacity(2 * self.l * self.l);
        for ky in 0..self.l {
            for kx in 0..self.l {
                for parity in [1i8, -1] {
                    out.push(SectorLabel::Momentum { kx, ky, parity });
                }
            }
        }
        out
    }
}

fn permute_bits(s: u32, perm: &[usize]) -> u32 {
    let mut out = 0u32;
    let mut rest = s;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        out |= 1 << perm[i];
        rest &= rest - 1;
    }
    out
}

/// Basis of one symmetry sector together with the sparse transverse-field operator
/// `sum_i sigma^x_i` expressed in it.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub label: SectorLabel,
    /// Representative bitstrings (ascending).
    pub reps: Vec<u32>,
    /// Orbit normalisation `|Stab(r)|` per representative (1 in the full basis).
    pub stab: Vec<u16>,
    /// Bond sum `sum_<ij> s_i s_j` per basis state.
    pub zz: Vec<f64>,
    /// Total magnetisation `sum_i s_i` per basis state.
    pub mz: Vec<f64>,
    /// Nonzero entries `(row, col, value)` of `sum_i sigma^x_i`.
    pub x_entries: Vec<(u32, u32, Complex64)>,
}

impl SectorBasis {
    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    pub fn full(lattice: &LatticeSpec) -> Self {
        let n = lattice.n_sites();
        let n_states = 1u32 << n;
        let reps: Vec<u32> = (0..n_states).collect();
        let mut x_entries = Vec::with_capacity(n_states as usize * n);
        for &s in &reps {
            for i in 0..n {
                x_entries.push((s ^ (1 << i), s, Complex64::new(1.0, 0.0)));
            }
        }
        let (zz, mz) = diagonal_values(lattice, &reps);
        Self {
            label: SectorLabel::Full,
            stab: vec![1; reps.len()],
            reps,
            zz,
            mz,
            x_entries,
        }
    }

    pub fn momentum(lattice: &LatticeSpec, table: &SymmetryTable, label: SectorLabel) -> Self {
        let SectorLabel::Momentum { kx, ky, parity } = label else {
            return Self::full(lattice);
        };
        let n = lattice.n_sites();
        let order = table.group_order();
        let chars: Vec<Complex64> = (0..order).map(|g| table.character(g, kx, ky, parity)).collect();

        let mut reps = Vec::new();
        let mut stab = Vec::new();
        for (s, &r) in table.rep.iter().enumerate() {
            if r as usize != s {
                continue;
            }
            // compatible iff the character is trivial on the stabiliser
            let mut sum = Complex64::new(0.0, 0.0);
            for (g, c) in chars.iter().enumerate().take(order) {
                if table.apply(g, r) == r {
                    sum += c;
                }
            }
            if (sum.re - table.stab[s] as f64).abs() < 1e-9 && sum.im.abs() < 1e-9 {
                reps.push(r);
                stab.push(table.stab[s]);
            }
        }

        let mut x_entries = Vec::new();
        for (col, &r) in reps.iter().enumerate() {
            for i in 0..n {
                let s = r ^ (1 << i);
                let target = table.rep[s as usize];
                let Ok(row) = reps.binary_search(&target) else {
                    continue;
                };
                let g = table.elem[s as usize] as usize;
                let norm = (stab[row] as f64 / stab[col] as f64).sqrt();
                x_entries.push((row as u32, col as u32, chars[g] * norm));
            }
        }
        // merge duplicates so the entry list is canonical
        x_entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut merged: Vec<(u32, u32, Complex64)> = Vec::with_capacity(x_entries.len());
        for e in x_entries {
            match merged.last_mut() {
                Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.2.norm() > 1e-14);

        let (zz, mz) = diagonal_values(lattice, &reps);
        Self {
            label,
            reps,
            stab,
            zz,
            mz,
            x_entries: merged,
        }
    }
}

fn diagonal_values(lattice: &LatticeSpec, reps: &[u32]) -> (Vec<f64>, Vec<f64>) {
    let n = lattice.n_sites();
    let mut zz = Vec::with_capacity(reps.len());
    let mut mz = Vec::with_capacity(reps.len());
    for &s in reps {
        let spin = |i: usize| if s >> i & 1 == 1 { -1i64 } else { 1 };
        let b: i64 = lattice.bonds().iter().map(|&(a, c)| spin(a) * spin(c)).sum();
        zz.push(b as f64);
        mz.push((n as i64 - 2 * s.count_ones() as i64) as f64);
    }
    (zz, mz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn sector_dimensions_sum_to_hilbert_space() {
        for l in [2, 3, 4] {
            let lat = build_lattice(l).unwrap();
            let table = SymmetryTable::new(&lat);
            let total: usize = table
                .labels()
                .into_iter()
                .map(|lab| SectorBasis::momentum(&lat, &table, lab).dim())
                .sum();
            assert_eq!(total, 1 << lat.n_sites(), "L={l}");
        }
    }

    #[test]
    fn largest_4x4_sector() {
        let lat = build_lattice(4).unwrap();
        let table = SymmetryTable::new(&lat);
        let largest = table
            .labels()
            .into_iter()
            .map(|lab| SectorBasis::momentum(&lat, &table, lab).dim())
            .max()
            .unwrap();
        // translation x spin-flip gives roughly 2^16 / 32
        assert!(largest > 2000 && largest < 2200, "{largest}");
    }

    #[test]
    fn x_operator_is_hermitian() {
        let lat = build_lattice(3).unwrap();
        let table = SymmetryTable::new(&lat);
        for lab in table.labels() {
            let b = SectorBasis::momentum(&lat, &table, lab);
            let mut m = nalgebra::DMatrix::<Complex64>::zeros(b.dim(), b.dim());
            for &(r, c, v) in &b.x_entries {
                m[(r as usize, c as usize)] += v;
            }
            let diff = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "{lab}: {diff}");
        }
    }
}
