//! Classical Ising Monte Carlo used when the transverse field vanishes.
//!
//! One sweep is a Metropolis pass over all sites followed by a fixed number of
//! Wolff clusters. During thermalization clusters are grown until `N` spins have
//! flipped and their mean size sets that number; stopping on the flipped count
//! itself would bias the measured ensemble.

use rand::Rng;

use super::rng::ChainRng;
use super::stats::Sample;
use crate::lattice::LatticeSpec;

#[derive(Debug, Clone)]
pub struct ClassicalIsing {
    neighbors: Vec<[usize; 4]>,
    n_bonds: usize,
    j: f64,
    /// Metropolis acceptance for local field `2 s_i sum_nb s_j` in `{2, 4, 6, 8}`.
    accept: [f64; 5],
    p_add: f64,
    pub spins: Vec<i8>,
    stack: Vec<usize>,
    in_cluster: Vec<bool>,
    clusters_per_sweep: Option<usize>,
    grown: (usize, usize),
}

impl ClassicalIsing {
    pub fn new(lattice: &LatticeSpec, j: f64, t: f64, rng: &mut ChainRng) -> Self {
        let n = lattice.n_sites();
        let beta = 1.0 / t;
        Self {
            neighbors: (0..n).map(|s| *lattice.neighbors(s)).collect(),
            n_bonds: lattice.n_bonds(),
            j,
            accept: std::array::from_fn(|k| (-2.0 * beta * j * (2 * k) as f64).exp().min(1.0)),
            p_add: 1.0 - (-2.0 * beta * j).exp(),
            spins: (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect(),
            stack: Vec::new(),
            in_cluster: vec![false; n],
            clusters_per_sweep: None,
            grown: (0, 0),
        }
    }

    pub fn sweep(&mut self, rng: &mut ChainRng) {
        let n = self.spins.len();
        for i in 0..n {
            let field: i32 = self.neighbors[i].iter().map(|&k| self.spins[k] as i32).sum();
            let de = self.spins[i] as i32 * field; // energy change is 2 J de
            if de <= 0 || rng.random::<f64>() < self.accept[(de / 2) as usize] {
                self.spins[i] = -self.spins[i];
            }
        }
        if self.p_add <= 0.0 {
            return;
        }
        match self.clusters_per_sweep {
            Some(k) => {
                for _ in 0..k {
                    self.wolff(rng);
                }
            }
            None => {
                let mut flipped = 0;
                while flipped < n {
                    let size = self.wolff(rng);
                    flipped += size;
                    self.grown.0 += 1;
                    self.grown.1 += size;
                }
            }
        }
    }

    /// Freezes the clusters per sweep at `N / <cluster size>` seen so far.
    /// Call once thermalization is done.
    pub fn fix_cluster_count(&mut self) -> usize {
        let n = self.spins.len();
        let k = if self.grown.0 == 0 {
            1
        } else {
            let mean = self.grown.1 as f64 / self.grown.0 as f64;
            ((n as f64 / mean).round() as usize).clamp(1, n)
        };
        self.clusters_per_sweep = Some(k);
        k
    }

    fn wolff(&mut self, rng: &mut ChainRng) -> usize {
        let seed = rng.random_range(0..self.spins.len());
        let s0 = self.spins[seed];
        self.stack.clear();
        self.stack.push(seed);
        self.in_cluster[seed] = true;
        let mut members = Vec::new();
        while let Some(i) = self.stack.pop() {
            members.push(i);
            // duplicated neighbours on the 2x2 torus stand for two bonds
            for k in 0..4 {
                let nb = self.neighbors[i][k];
                if !self.in_cluster[nb] && self.spins[nb] == s0 && rng.random::<f64>() < self.p_add {
                    self.in_cluster[nb] = true;
                    self.stack.push(nb);
                }
            }
        }
        for &i in &members {
            self.spins[i] = -s0;
            self.in_cluster[i] = false;
        }
        members.len()
    }

    pub fn measure(&self) -> Sample {
        let n = self.spins.len() as f64;
        let m = self.spins.iter().map(|&s| s as i64).sum::<i64>() as f64 / n;
        let twice: i64 = (0..self.spins.len())
            .map(|i| {
                let s = self.spins[i] as i64;
                self.neighbors[i].iter().map(|&k| s * self.spins[k] as i64).sum::<i64>()
            })
            .sum();
        let zz = (twice / 2) as f64;
        debug_assert!(zz.abs() <= self.n_bonds as f64);
        Sample {
            energy: -self.j * zz,
            zz,
            x_sum: 0.0,
            m2: m * m,
            m4: m.powi(4),
            cnn: zz / n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::qmc::rng::chain_rng;

    #[test]
    fn cold_start_orders() {
        let lat = build_lattice(8).unwrap();
        let mut rng = chain_rng(9, 0);
        let mut c = ClassicalIsing::new(&lat, 1.0, 1.0, &mut rng);
        for _ in 0..200 {
            c.sweep(&mut rng);
        }
        assert!(c.measure().m2 > 0.9);
    }

    /// Exact `<E>` and `<m^2>` by enumerating all configurations.
    fn enumerate(lat: &crate::lattice::LatticeSpec, t: f64) -> (f64, f64) {
        let n = lat.n_sites();
        let (mut z, mut e, mut m2) = (0.0, 0.0, 0.0);
        for s in 0..1u32 << n {
            let spins: Vec<i8> = (0..n).map(|i| if s >> i & 1 == 0 { 1 } else { -1 }).collect();
            let en = -(lat.zz_bond_sum(&spins) as f64);
            let m = spins.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
            let w = (-en / t).exp();
            z += w;
            e += w * en;
            m2 += w * m * m;
        }
        (e / z, m2 / z)
    }

    #[test]
    fn small_torus_matches_enumeration() {
        let lat = build_lattice(3).unwrap();
        for t in [1.5, 3.0] {
            let (e_exact, m2_exact) = enumerate(&lat, t);
            let mut rng = chain_rng(4, 0);
            let mut c = ClassicalIsing::new(&lat, 1.0, t, &mut rng);
            for _ in 0..2000 {
                c.sweep(&mut rng);
            }
            c.fix_cluster_count();
            let n_meas = 200_000;
            let (mut e, mut m2) = (0.0, 0.0);
            for _ in 0..n_meas {
                c.sweep(&mut rng);
                let s = c.measure();
                e += s.energy;
                m2 += s.m2;
            }
            let (e, m2) = (e / n_meas as f64, m2 / n_meas as f64);
            assert!((e - e_exact).abs() < 0.02 * e_exact.abs(), "T={t}: {e} vs {e_exact}");
            assert!((m2 - m2_exact).abs() < 0.01, "T={t}: {m2} vs {m2_exact}");
        }
    }

    #[test]
    fn polarized_measure() {
        let lat = build_lattice(4).unwrap();
        let mut rng = chain_rng(1, 0);
        let mut c = ClassicalIsing::new(&lat, 1.0, 1.0, &mut rng);
        c.spins.fill(-1);
        let s = c.measure();
        assert_eq!(s.zz, 32.0);
        assert_eq!(s.energy, -32.0);
        assert_eq!(s.m2, 1.0);
    }
}
