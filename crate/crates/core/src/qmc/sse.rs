//! Stochastic series expansion for the transverse-field Ising model.
//!
//! The Hamiltonian is split into positive operators
//! `H_b = J (s_i s_j + 1)` on bonds, `H_i^d = h` and `H_i^o = h sigma^x_i` on sites,
//! so `-H = sum_b H_b + sum_i (H_i^d + H_i^o) - C` with `C = J N_b + h N`.
//!
//! Operators are packed into a `u32`: the low two bits hold the kind, the rest the
//! bond or site index.

use rand::Rng;

use super::rng::ChainRng;
use super::stats::Sample;
use crate::lattice::LatticeSpec;

pub const IDENTITY: u32 = 0;
const BOND: u32 = 1;
const SITE_DIAG: u32 = 2;
const SITE_OFF: u32 = 3;

#[inline]
fn kind(op: u32) -> u32 {
    op & 3
}

#[inline]
fn index(op: u32) -> usize {
    (op >> 2) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Identity,
    Bond(usize),
    SiteDiag(usize),
    SiteOff(usize),
}

impl Operator {
    pub fn decode(op: u32) -> Self {
        match kind(op) {
            BOND => Operator::Bond(index(op)),
            SITE_DIAG => Operator::SiteDiag(index(op)),
            SITE_OFF => Operator::SiteOff(index(op)),
            _ => Operator::Identity,
        }
    }

    pub fn encode(self) -> u32 {
        match self {
            Operator::Identity => IDENTITY,
            Operator::Bond(b) => (b as u32) << 2 | BOND,
            Operator::SiteDiag(i) => (i as u32) << 2 | SITE_DIAG,
            Operator::SiteOff(i) => (i as u32) << 2 | SITE_OFF,
        }
    }
}

/// Couplings and geometry an SSE chain needs.
#[derive(Debug, Clone)]
pub struct SseModel {
    pub bonds: Vec<(usize, usize)>,
    pub neighbors: Vec<[usize; 4]>,
    pub j: f64,
    pub h: f64,
    pub beta: f64,
}

impl SseModel {
    pub fn new(lattice: &LatticeSpec, j: f64, h: f64, t: f64) -> Self {
        Self {
            bonds: lattice.bonds().to_vec(),
            neighbors: (0..lattice.n_sites()).map(|s| *lattice.neighbors(s)).collect(),
            j,
            h,
            beta: 1.0 / t,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.neighbors.len()
    }

    /// Constant added to `-H` to make every operator weight nonnegative.
    pub fn energy_shift(&self) -> f64 {
        self.j * self.bonds.len() as f64 + self.h * self.n_sites() as f64
    }

    fn bond_weight_total(&self) -> f64 {
        2.0 * self.j * self.bonds.len() as f64
    }

    fn site_weight_total(&self) -> f64 {
        self.h * self.n_sites() as f64
    }
}

/// Spin configuration at imaginary time zero plus the operator string.
#[derive(Debug, Clone)]
pub struct SseState {
    pub spins: Vec<i8>,
    pub ops: Vec<u32>,
    n: usize,
    // cluster scratch
    parent: Vec<u32>,
    flip: Vec<i8>,
    first: Vec<u32>,
    last: Vec<u32>,
    positions: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl SseState {
    pub fn new(n_sites: usize, cutoff: usize, rng: &mut ChainRng) -> Self {
        Self {
            spins: (0..n_sites).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect(),
            ops: vec![IDENTITY; cutoff.max(1)],
            n: 0,
            parent: Vec::new(),
            flip: Vec::new(),
            first: vec![NONE; n_sites],
            last: vec![NONE; n_sites],
            positions: Vec::new(),
        }
    }

    /// Builds a state from explicit parts; used by tests to set up edge cases.
    pub fn from_parts(spins: Vec<i8>, ops: Vec<u32>) -> Self {
        let n = ops.iter().filter(|&&o| o != IDENTITY).count();
        let n_sites = spins.len();
        Self {
            spins,
            ops,
            n,
            parent: Vec::new(),
            flip: Vec::new(),
            first: vec![NONE; n_sites],
            last: vec![NONE; n_sites],
            positions: Vec::new(),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.ops.len()
    }

    pub fn n_ops(&self) -> usize {
        self.n
    }

    /// Extends the string with identities so it holds at least `cutoff` slots.
    pub fn grow_cutoff(&mut self, cutoff: usize) {
        if cutoff > self.ops.len() {
            self.ops.resize(cutoff, IDENTITY);
        }
    }

    /// Checks periodicity, bond-operator validity and the operator count.
    pub fn check_invariants(&self, model: &SseModel) -> Result<(), String> {
        let mut spins = self.spins.clone();
        let mut count = 0;
        for (p, &op) in self.ops.iter().enumerate() {
            match Operator::decode(op) {
                Operator::Identity => continue,
                Operator::Bond(b) => {
                    let (a, c) = model.bonds[b];
                    if spins[a] != spins[c] {
                        return Err(format!("bond operator {b} at {p} on antiparallel spins"));
                    }
                }
                Operator::SiteDiag(_) => {}
                Operator::SiteOff(i) => spins[i] = -spins[i],
            }
            count += 1;
        }
        if spins != self.spins {
            return Err("propagated configuration is not periodic".into());
        }
        if count != self.n {
            return Err(format!("operator count {} != stored {}", count, self.n));
        }
        if self.n > self.ops.len() {
            return Err("more operators than slots".into());
        }
        Ok(())
    }

    /// Inserts and removes diagonal operators slot by slot.
    pub fn diagonal_update(&mut self, model: &SseModel, rng: &mut ChainRng) {
        let w_bond = model.bond_weight_total();
        let w = w_bond + model.site_weight_total();
        if w <= 0.0 {
            return;
        }
        let bw = model.beta * w;
        let cutoff = self.ops.len();
        let n_bonds = model.bonds.len();
        let n_sites = model.n_sites();
        for p in 0..cutoff {
            let op = self.ops[p];
            match kind(op) {
                IDENTITY => {
                    let ratio = bw / (cutoff - self.n) as f64;
                    if ratio < 1.0 && rng.random::<f64>() >= ratio {
                        continue;
                    }
                    if rng.random::<f64>() * w < w_bond {
                        let b = rng.random_range(0..n_bonds);
                        let (a, c) = model.bonds[b];
                        if self.spins[a] == self.spins[c] {
                            self.ops[p] = Operator::Bond(b).encode();
                            self.n += 1;
                        }
                    } else {
                        let i = rng.random_range(0..n_sites);
                        self.ops[p] = Operator::SiteDiag(i).encode();
                        self.n += 1;
                    }
                }
                BOND | SITE_DIAG => {
                    let ratio = (cutoff - self.n + 1) as f64 / bw;
                    if ratio >= 1.0 || rng.random::<f64>() < ratio {
                        self.ops[p] = IDENTITY;
                        self.n -= 1;
                    }
                }
                _ => {
                    let i = index(op);
                    self.spins[i] = -self.spins[i];
                }
            }
        }
    }

    /// Swendsen-Wang style cluster update.
    ///
    /// Bond operators glue their four legs together; site operators cut the
    /// world line. Every cluster flips with probability 1/2, and a site operator
    /// whose lower and upper legs end up flipped differently switches between
    /// its diagonal and off-diagonal form (both carry weight `h`).
    pub fn cluster_update(&mut self, model: &SseModel, rng: &mut ChainRng) {
        let n_sites = model.n_sites();
        self.positions.clear();
        for (p, &op) in self.ops.iter().enumerate() {
            if op != IDENTITY {
                self.positions.push(p as u32);
            }
        }
        let n_legs = 4 * self.positions.len();
        self.parent.clear();
        self.parent.extend(0..n_legs as u32);
        self.first.fill(NONE);
        self.last.fill(NONE);

        for k in 0..self.positions.len() {
            let op = self.ops[self.positions[k] as usize];
            let base = 4 * k as u32;
            match kind(op) {
                BOND => {
                    let (a, c) = model.bonds[index(op)];
                    self.attach(a, base, base + 2);
                    self.attach(c, base + 1, base + 3);
                    union(&mut self.parent, base, base + 1);
                    union(&mut self.parent, base, base + 2);
                    union(&mut self.parent, base, base + 3);
                }
                _ => self.attach(index(op), base, base + 2),
            }
        }
        for s in 0..n_sites {
            if self.first[s] != NONE {
                union(&mut self.parent, self.last[s], self.first[s]);
            }
        }

        // 0 = undecided, 1 = keep, -1 = flip
        self.flip.clear();
        self.flip.resize(n_legs, 0);
        for k in 0..self.positions.len() {
            let p = self.positions[k] as usize;
            let op = self.ops[p];
            if kind(op) == BOND {
                continue;
            }
            let lo = self.cluster_flip(4 * k as u32, rng);
            let hi = self.cluster_flip(4 * k as u32 + 2, rng);
            if lo != hi {
                self.ops[p] = op ^ 1; // SITE_DIAG <-> SITE_OFF
            }
        }
        for s in 0..n_sites {
            let f = if self.first[s] != NONE {
                self.cluster_flip(self.first[s], rng)
            } else if rng.random::<bool>() {
                -1
            } else {
                1
            };
            self.spins[s] *= f;
        }
    }

    fn attach(&mut self, site: usize, lower: u32, upper: u32) {
        if self.last[site] == NONE {
            self.first[site] = lower;
        } else {
            union(&mut self.parent, self.last[site], lower);
        }
        self.last[site] = upper;
    }

    fn cluster_flip(&mut self, leg: u32, rng: &mut ChainRng) -> i8 {
        let root = find(&mut self.parent, leg) as usize;
        if self.flip[root] == 0 {
            self.flip[root] = if rng.random::<bool>() { -1 } else { 1 };
        }
        self.flip[root]
    }

    /// One sample of every estimator. Diagonal observables are averaged over the
    /// propagated states in front of each operator.
    pub fn measure(&self, model: &SseModel) -> Sample {
        let n_sites = model.n_sites() as f64;
        let mut spins = self.spins.clone();
        let mut m: i64 = spins.iter().map(|&s| s as i64).sum();
        let mut zz: i64 = model
            .bonds
            .iter()
            .map(|&(a, c)| (spins[a] * spins[c]) as i64)
            .sum();
        let (mut acc_zz, mut acc_m2, mut acc_m4) = (0.0, 0.0, 0.0);
        let mut n_off = 0usize;
        for &op in &self.ops {
            if op == IDENTITY {
                continue;
            }
            let mm = m as f64 / n_sites;
            acc_zz += zz as f64;
            acc_m2 += mm * mm;
            acc_m4 += mm * mm * mm * mm;
            if kind(op) == SITE_OFF {
                n_off += 1;
                let i = index(op);
                let si = spins[i] as i64;
                let field: i64 = model.neighbors[i].iter().map(|&nb| spins[nb] as i64).sum();
                m -= 2 * si;
                zz -= 2 * si * field;
                spins[i] = -spins[i];
            }
        }
        let (zz_avg, m2, m4) = if self.n == 0 {
            let mm = m as f64 / n_sites;
            (zz as f64, mm * mm, mm.powi(4))
        } else {
            let k = self.n as f64;
            (acc_zz / k, acc_m2 / k, acc_m4 / k)
        };
        let t = 1.0 / model.beta;
        Sample {
            energy: -t * self.n as f64 + model.energy_shift(),
            zz: zz_avg,
            x_sum: if model.h > 0.0 { t * n_off as f64 / model.h } else { 0.0 },
            m2,
            m4,
            cnn: zz_avg / n_sites,
        }
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let up = parent[parent[x as usize] as usize];
        parent[x as usize] = up;
        x = up;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // smaller root wins; keeps the structure deterministic
        if ra < rb {
            parent[rb as usize] = ra;
        } else {
            parent[ra as usize] = rb;
        }
    }
}
