//! Post-quench temperature from energy conservation.
//!
//! After a sudden change `h_i -> h_f` the energy `E_q = Tr(rho_i H_f)` is
//! conserved. Splitting `H_f` into its bond and field parts gives
//! `E_q = -J <zz>_i - h_f <x>_i`, so one initial-ensemble run serves a whole
//! `h_f` grid. `T_f` solves `E(h_f, T_f) = E_q` and is found by bisection on an
//! energy evaluator that may be noisy.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ed::{cache::load_or_compute, EdLimits, EigenTable, ObservableKind, SectorBases};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, InitialState, LatticeSpec, ModelParams};
use crate::qmc::{EstimateSet, Precision, QmcRunner};

/// A mean with its 1-sigma statistical error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub mean: f64,
    pub err: f64,
}

impl Measured {
    pub fn exact(mean: f64) -> Self {
        Self { mean, err: 0.0 }
    }
}

/// Initial-ensemble expectation values entering the quench energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialEnsemble {
    pub l: usize,
    pub j: f64,
    pub h_i: f64,
    pub state: InitialState,
    pub zz: Measured,
    pub x: Measured,
    pub energy: Measured,
}

impl InitialEnsemble {
    /// Thermal ensemble sampled by QMC at the configuration's `(h, T)`.
    pub fn from_estimates(est: &EstimateSet) -> Result<Self> {
        let pick = |name: &str, e: crate::qmc::Estimate| {
            if e.mean.is_finite() && e.stderr.is_finite() && e.n_bins > 0 {
                Ok(Measured {
                    mean: e.mean,
                    err: e.stderr,
                })
            } else {
                Err(Error::invalid(format!("estimate set has no usable {name} estimator")))
            }
        };
        Ok(Self {
            l: est.config.l,
            j: est.config.j,
            h_i: est.config.h,
            state: InitialState::Thermal { t: est.config.t },
            zz: pick("zz_bond_sum", est.zz_bond_sum)?,
            x: pick("x_sum", est.x_sum)?,
            energy: pick("total_energy", est.total_energy)?,
        })
    }

    /// Exact values from a tabulated spectrum of `H(h_i)`.
    pub fn exact(table: &EigenTable, l: usize, j: f64, h_i: f64, state: InitialState) -> Result<Self> {
        let get = |obs| -> Result<f64> {
            match state {
                InitialState::Thermal { t } => table.thermal(t, obs),
                InitialState::GroundState => Ok(table.ground_state(obs)?.value),
            }
        };
        Ok(Self {
            l,
            j,
            h_i,
            state,
            zz: Measured::exact(get(ObservableKind::ZzBondSum)?),
            x: Measured::exact(get(ObservableKind::XSum)?),
            energy: Measured::exact(get(ObservableKind::TotalEnergy)?),
        })
    }

    pub fn t_i(&self) -> Option<f64> {
        match self.state {
            InitialState::Thermal { t } => Some(t),
            InitialState::GroundState => None,
        }
    }

    /// `E_q = -J <zz> - h_f <x>` with independent-error propagation.
    pub fn quench_energy(&self, h_f: f64) -> Result<QuenchEnergy> {
        if !h_f.is_finite() || h_f < 0.0 {
            return Err(Error::invalid(format!("h_f must be finite and >= 0, got {h_f}")));
        }
        let e_q = -self.j * self.zz.mean - h_f * self.x.mean;
        let de_q = ((self.j * self.zz.err).powi(2) + (h_f * self.x.err).powi(2)).sqrt();
        if !e_q.is_finite() {
            return Err(Error::invalid("quench energy is not finite"));
        }
        Ok(QuenchEnergy {
            e_q,
            de_q,
            h_i: self.h_i,
            t_i: self.t_i(),
            h_f,
            zz_mean: self.zz.mean,
            x_mean: self.x.mean,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchEnergy {
    pub e_q: f64,
    pub de_q: f64,
    pub h_i: f64,
    pub t_i: Option<f64>,
    pub h_f: f64,
    pub zz_mean: f64,
    pub x_mean: f64,
}

/// Quench energy straight from a QMC estimate set of the initial ensemble.
pub fn quench_energy(est_i: &EstimateSet, h_f: f64) -> Result<QuenchEnergy> {
    InitialEnsemble::from_estimates(est_i)?.quench_energy(h_f)
}

/// One energy evaluation `E(h, T) +- err`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub t: f64,
    pub energy: f64,
    pub err: f64,
    pub precision: Precision,
}

/// Equilibrium energy as a function of temperature, with 1-sigma errors.
pub trait EnergyEvaluator: Sync {
    fn lattice_size(&self) -> usize;
    fn coupling(&self) -> f64;
    /// Whether evaluations are noisy; exact evaluators ignore `precision`.
    fn is_stochastic(&self) -> bool;
    fn energy(&self, h: f64, t: f64, precision: Precision) -> Result<Evaluation>;
    fn initial(&self, h_i: f64, state: InitialState) -> Result<InitialEnsemble>;
}

/// Exact evaluator backed by full diagonalization.
#[derive(Debug)]
pub struct EdEvaluator {
    lattice: LatticeSpec,
    bases: SectorBases,
    j: f64,
    cache_dir: Option<PathBuf>,
    tables: Mutex<HashMap<u64, Arc<EigenTable>>>,
}

impl EdEvaluator {
    pub fn new(l: usize, j: f64, limits: &EdLimits) -> Result<Self> {
        let lattice = build_lattice(l)?;
        let bases = SectorBases::new(&lattice, true, limits)?;
        Ok(Self {
            lattice,
            bases,
            j,
            cache_dir: None,
            tables: Mutex::new(HashMap::new()),
        })
    }

    /// Spectra persist under `dir` and are reused across runs.
    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn table(&self, h: f64) -> Result<Arc<EigenTable>> {
        if let Some(t) = self.tables.lock().unwrap().get(&h.to_bits()) {
            return Ok(Arc::clone(t));
        }
        let params = ModelParams::new(self.j, h)?;
        let spectra = match &self.cache_dir {
            Some(dir) => load_or_compute(dir, &self.bases, &params)?,
            None => self.bases.diagonalize(&params)?,
        };
        let obs = [
            ObservableKind::ZzBondSum,
            ObservableKind::XSum,
            ObservableKind::M2,
            ObservableKind::M4,
            ObservableKind::Cnn,
        ];
        let table = Arc::new(EigenTable::new(&spectra, &obs)?);
        self.tables.lock().unwrap().insert(h.to_bits(), Arc::clone(&table));
        Ok(table)
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }
}

impl EnergyEvaluator for EdEvaluator {
    fn lattice_size(&self) -> usize {
        self.lattice.l()
    }

    fn coupling(&self) -> f64 {
        self.j
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn energy(&self, h: f64, t: f64, _precision: Precision) -> Result<Evaluation> {
        Ok(Evaluation {
            t,
            energy: self.table(h)?.thermal(t, ObservableKind::TotalEnergy)?,
            err: 0.0,
            precision: Precision::Full,
        })
    }

    fn initial(&self, h_i: f64, state: InitialState) -> Result<InitialEnsemble> {
        InitialEnsemble::exact(&*self.table(h_i)?, self.lattice.l(), self.j, h_i, state)
    }
}

/// QMC evaluator; temperatures are resolved to 1e-6.
#[derive(Debug, Clone)]
pub struct QmcEvaluator {
    pub runner: Arc<QmcRunner>,
    pub l: usize,
}

impl QmcEvaluator {
    pub fn new(runner: Arc<QmcRunner>, l: usize) -> Self {
        Self { runner, l }
    }
}

impl EnergyEvaluator for QmcEvaluator {
    fn lattice_size(&self) -> usize {
        self.l
    }

    fn coupling(&self) -> f64 {
        self.runner.settings.j
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn energy(&self, h: f64, t: f64, precision: Precision) -> Result<Evaluation> {
        let est = self.runner.run(self.l, h, t, precision)?;
        Ok(Evaluation {
            t: est.config.t,
            energy: est.total_energy.mean,
            err: est.total_energy.stderr,
            precision,
        })
    }

    fn initial(&self, h_i: f64, state: InitialState) -> Result<InitialEnsemble> {
        match state {
            InitialState::Thermal { t } => {
                InitialEnsemble::from_estimates(&*self.runner.run(self.l, h_i, t, Precision::Full)?)
            }
            InitialState::GroundState => Err(Error::invalid(
                "the QMC evaluator needs a thermal initial state; use the exact evaluator for ground states",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Overrides the default starting interval.
    pub bracket: Option<(f64, f64)>,
    pub max_steps: usize,
    pub max_expansions: usize,
    /// Bound runs sit at `T_f (1 +- extra_delta)`; zero skips them.
    pub extra_delta: f64,
    /// Coarse evaluations until the stopping rule first fires.
    pub adaptive: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            bracket: None,
            max_steps: 60,
            max_expansions: 3,
            extra_delta: 0.02,
            adaptive: true,
        }
    }
}

/// `(max(T_i/4, 1/L), 4 max(T_i, 1))`; ground-state quenches use `T_i = 0`.
pub fn default_bracket(t_i: Option<f64>, l: usize) -> (f64, f64) {
    let t_i = t_i.unwrap_or(0.0);
    ((t_i / 4.0).max(1.0 / l as f64), 4.0 * t_i.max(1.0))
}

/// Everything the bisection produced before bounds are attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bisection {
    pub t_f: f64,
    /// Surviving interval.
    pub interval: (f64, f64),
    pub n_steps: usize,
    pub converged: bool,
    /// Full-precision evaluation at `T_f`.
    pub at_t_f: Evaluation,
    pub trail: Vec<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfResult {
    pub h_f: f64,
    pub t_f: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub n_steps: usize,
    pub converged: bool,
    pub interval: (f64, f64),
    pub quench: QuenchEnergy,
    /// Every evaluation in order, including bracket expansion.
    pub trail: Vec<Evaluation>,
    pub extra: Vec<Evaluation>,
    /// Adjacent pairs (in `T`) whose energies decrease by more than their summed errors.
    pub monotone_violations: usize,
    /// `T_hi < T_i`: the steady state is colder than the initial ensemble.
    pub cooling: bool,
    pub identity: bool,
}

fn bisect(h_f: f64, eq: &QuenchEnergy, evaluator: &dyn EnergyEvaluator, opts: &SolveOptions) -> Result<Bisection> {
    let l = evaluator.lattice_size();
    let (mut t1, mut t2) = opts.bracket.unwrap_or_else(|| default_bracket(eq.t_i, l));
    if !(t1 > 0.0 && t2 > t1 && t2.is_finite()) {
        return Err(Error::invalid(format!("bad bracket ({t1}, {t2})")));
    }
    let mut precision = if evaluator.is_stochastic() && opts.adaptive {
        Precision::Coarse
    } else {
        Precision::Full
    };
    let mut trail = Vec::new();
    let eval = |t: f64, p: Precision, trail: &mut Vec<Evaluation>| -> Result<Evaluation> {
        let e = evaluator.energy(h_f, t, p)?;
        trail.push(e);
        Ok(e)
    };

    let mut e1 = eval(t1, precision, &mut trail)?;
    let mut e2 = eval(t2, precision, &mut trail)?;
    let (mut halvings, mut doublings) = (0, 0);
    loop {
        if e1.energy - e2.energy > e1.err + e2.err {
            return Err(Error::DataQuality(format!(
                "E(T) decreases across the bracket: E({t1}) = {} +- {}, E({t2}) = {} +- {}",
                e1.energy, e1.err, e2.energy, e2.err
            )));
        }
        if eq.e_q < e1.energy && halvings < opts.max_expansions {
            t1 /= 2.0;
            e1 = eval(t1, precision, &mut trail)?;
            halvings += 1;
        } else if eq.e_q > e2.energy && doublings < opts.max_expansions {
            t2 *= 2.0;
            e2 = eval(t2, precision, &mut trail)?;
            doublings += 1;
        } else {
            break;
        }
    }
    if eq.e_q < e1.energy || eq.e_q > e2.energy {
        return Err(Error::BracketFailure {
            e_q: eq.e_q,
            t_lo: t1,
            t_hi: t2,
            e_lo: e1.energy,
            e_hi: e2.energy,
        });
    }

    let stop = |e: &Evaluation| (e.energy - eq.e_q).abs() <= e.err + eq.de_q;
    let mut steps = 0;
    let mut converged = false;
    let mut t_f = 0.5 * (t1 + t2);
    let mut last = None;
    while steps < opts.max_steps {
        let mid = 0.5 * (t1 + t2);
        let mut em = eval(mid, precision, &mut trail)?;
        steps += 1;
        t_f = mid;
        if stop(&em) && precision == Precision::Coarse {
            precision = Precision::Full;
            em = eval(mid, precision, &mut trail)?;
        }
        last = Some(em);
        if stop(&em) {
            converged = true;
            break;
        }
        if (e1.energy - eq.e_q) * (em.energy - eq.e_q) < 0.0 {
            t2 = mid;
        } else {
            t1 = mid;
            e1 = em;
        }
    }
    let at_t_f = match last {
        Some(e) if e.precision == Precision::Full => e,
        _ => eval(t_f, Precision::Full, &mut trail)?,
    };
    Ok(Bisection {
        t_f,
        interval: (t1, t2),
        n_steps: steps,
        converged,
        at_t_f,
        trail,
    })
}

/// Bounds on `T_f` from the local slope `dE/dT` between the two extra runs
/// nearest to `T_f`: `T_f +- (dE_q + dE(T_f)) / s`. A slope consistent with zero
/// widens the bounds to the surviving bisection interval.
pub fn tf_bounds(bis: &Bisection, eq: &QuenchEnergy, extra: &[Evaluation]) -> Result<(f64, f64)> {
    if extra.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 extra runs near T_f, got {}", extra.len())));
    }
    let mut near: Vec<&Evaluation> = extra.iter().collect();
    near.sort_by(|a, b| (a.t - bis.t_f).abs().total_cmp(&(b.t - bis.t_f).abs()));
    let (mut a, mut b) = (near[0], near[1]);
    if a.t > b.t {
        std::mem::swap(&mut a, &mut b);
    }
    let dt = b.t - a.t;
    if !(dt > 0.0) {
        return Err(Error::invalid("extra runs must sit at distinct temperatures"));
    }
    let slope = (b.energy - a.energy) / dt;
    let slope_err = (a.err.powi(2) + b.err.powi(2)).sqrt() / dt;
    let widened = (bis.interval.0.min(bis.t_f), bis.interval.1.max(bis.t_f));
    if !(slope > slope_err) || slope <= 0.0 {
        return Ok(widened);
    }
    let half = (eq.de_q + bis.at_t_f.err) / slope;
    Ok((bis.t_f - half, bis.t_f + half))
}

fn monotone_violations(trail: &[Evaluation]) -> usize {
    let mut sorted: Vec<&Evaluation> = trail.iter().collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    sorted
        .windows(2)
        .filter(|w| w[0].t < w[1].t && w[0].energy - w[1].energy > w[0].err + w[1].err)
        .count()
}

/// Solves `E(h_f, T_f) = E_q` and attaches bounds.
pub fn solve_tf(h_f: f64, eq: &QuenchEnergy, evaluator: &dyn EnergyEvaluator, opts: &SolveOptions) -> Result<TfResult> {
    let bis = bisect(h_f, eq, evaluator, opts)?;
    let mut extra = Vec::new();
    let (t_lo, t_hi) = if opts.extra_delta > 0.0 {
        for t in [bis.t_f * (1.0 - opts.extra_delta), bis.t_f * (1.0 + opts.extra_delta)] {
            extra.push(evaluator.energy(h_f, t, Precision::Full)?);
        }
        tf_bounds(&bis, eq, &extra)?
    } else if bis.at_t_f.err == 0.0 && eq.de_q == 0.0 {
        (bis.t_f, bis.t_f)
    } else {
        (bis.interval.0.min(bis.t_f), bis.interval.1.max(bis.t_f))
    };
    let mut all = bis.trail.clone();
    all.extend_from_slice(&extra);
    Ok(TfResult {
        h_f,
        t_f: bis.t_f,
        t_lo,
        t_hi,
        n_steps: bis.n_steps,
        converged: bis.converged,
        interval: bis.interval,
        quench: *eq,
        monotone_violations: monotone_violations(&all),
        trail: bis.trail,
        extra,
        // identity quenches return T_i up to roundoff, which zero-width exact bounds would flag
        cooling: h_f != eq.h_i && eq.t_i.is_some_and(|t_i| t_hi < t_i),
        identity: h_f == eq.h_i,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfPoint {
    pub h_f: f64,
    pub result: Option<TfResult>,
    /// Solver error for this grid point, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfCurve {
    pub l: usize,
    pub initial: InitialEnsemble,
    pub points: Vec<TfPoint>,
}

impl TfCurve {
    pub fn h_i(&self) -> f64 {
        self.initial.h_i
    }

    pub fn t_i(&self) -> Option<f64> {
        self.initial.t_i()
    }

    pub fn solved(&self) -> impl Iterator<Item = &TfResult> {
        self.points.iter().filter_map(|p| p.result.as_ref())
    }

    /// Columns `schema_version,h_f,T_f,T_lo,T_hi,cooling_flag,identity_flag,n_steps,converged,error`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "schema_version",
            "h_f",
            "T_f",
            "T_lo",
            "T_hi",
            "cooling_flag",
            "identity_flag",
            "n_steps",
            "converged",
            "error",
        ])?;
        let v = crate::io::SCHEMA_VERSION.to_string();
        for p in &self.points {
            match &p.result {
                Some(r) => w.write_record([
                    v.clone(),
                    fmt(p.h_f),
                    fmt(r.t_f),
                    fmt(r.t_lo),
                    fmt(r.t_hi),
                    (r.cooling as u8).to_string(),
                    (r.identity as u8).to_string(),
                    r.n_steps.to_string(),
                    (r.converged as u8).to_string(),
                    String::new(),
                ])?,
                None => w.write_record([
                    v.clone(),
                    fmt(p.h_f),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    p.error.clone().unwrap_or_default(),
                ])?,
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// `T_f` over an `h_f` grid from a single initial ensemble. Grid points run in
/// parallel; a failing point is recorded and the sweep continues.
pub fn tf_curve(
    initial: &InitialEnsemble,
    h_f_grid: &[f64],
    evaluator: &dyn EnergyEvaluator,
    opts: &SolveOptions,
) -> Result<TfCurve> {
    if h_f_grid.is_empty() {
        return Err(Error::invalid("empty h_f grid"));
    }
    if h_f_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("h_f grid must be strictly increasing"));
    }
    let points = h_f_grid
        .par_iter()
        .map(|&h_f| {
            let outcome = initial
                .quench_energy(h_f)
                .and_then(|eq| solve_tf(h_f, &eq, evaluator, opts));
            match outcome {
                Ok(r) => TfPoint {
                    h_f,
                    result: Some(r),
                    error: None,
                },
                Err(e) => TfPoint {
                    h_f,
                    result: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(TfCurve {
        l: evaluator.lattice_size(),
        initial: initial.clone(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ed3() -> EdEvaluator {
        EdEvaluator::new(3, 1.0, &EdLimits::default()).unwrap()
    }

    #[test]
    fn quench_energy_formula_matches_exact_expectation() {
        // Tr(rho_i H_f) computed directly against the decomposition
        let ev = ed3();
        let init = ev.initial(2.0, InitialState::Thermal { t: 1.0 }).unwrap();
        let eq = init.quench_energy(3.0).unwrap();
        let t = ev.table(2.0).unwrap();
        let direct = -t.thermal(1.0, ObservableKind::ZzBondSum).unwrap() - 3.0 * t.thermal(1.0, ObservableKind::XSum).unwrap();
        assert!((eq.e_q - direct).abs() < 1e-12);
        assert_eq!(eq.de_q, 0.0);
        // identity quench returns the initial energy
        let same = init.quench_energy(2.0).unwrap();
        assert!((same.e_q - init.energy.mean).abs() < 1e-10);
        // h_f = 0 keeps only the bond term
        assert_eq!(init.quench_energy(0.0).unwrap().e_q, -init.zz.mean);
    }

    #[test]
    fn quench_energy_is_affine_in_h_f() {
        let init = InitialEnsemble {
            l: 4,
            j: 1.0,
            h_i: 1.0,
            state: InitialState::Thermal { t: 1.0 },
            zz: Measured { mean: 20.0, err: 0.1 },
            x: Measured { mean: 5.0, err: 0.05 },
            energy: Measured::exact(-25.0),
        };
        let e: Vec<f64> = [0.5, 1.5, 4.0].iter().map(|&h| init.quench_energy(h).unwrap().e_q).collect();
        let s1 = (e[1] - e[0]) / 1.0;
        let s2 = (e[2] - e[1]) / 2.5;
        assert!((s1 + 5.0).abs() < 1e-12 && (s2 + 5.0).abs() < 1e-12);
        let q = init.quench_energy(2.0).unwrap();
        assert!((q.de_q - (0.01f64 + 0.01).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identity_quench_recovers_initial_temperature() {
        let ev = ed3();
        let init = ev.initial(2.0, InitialState::Thermal { t: 1.0 }).unwrap();
        let eq = init.quench_energy(2.0).unwrap();
        let r = solve_tf(2.0, &eq, &ev, &SolveOptions::default()).unwrap();
        assert!((r.t_f - 1.0).abs() < 1e-6, "{}", r.t_f);
        assert!(r.identity && !r.cooling);
        assert_eq!((r.t_lo, r.t_hi), (r.t_f, r.t_f));
        assert!(r.trail.len() <= 60 + 2 + 6 + 1);
    }

    #[test]
    fn exact_bisection_error_bound() {
        let ev = ed3();
        let table = ev.table(1.5).unwrap();
        let t_star = 1.2345;
        let e = table.thermal(t_star, ObservableKind::TotalEnergy).unwrap();
        let eq = QuenchEnergy {
            e_q: e,
            de_q: 0.0,
            h_i: 0.7,
            t_i: Some(1.0),
            h_f: 1.5,
            zz_mean: 0.0,
            x_mean: 0.0,
        };
        let opts = SolveOptions {
            bracket: Some((0.5, 3.0)),
            max_steps: 20,
            ..Default::default()
        };
        let r = solve_tf(1.5, &eq, &ev, &opts).unwrap();
        assert_eq!(r.n_steps, 20);
        assert!((r.t_f - t_star).abs() <= 2.5 / (1u64 << 20) as f64);
    }

    #[test]
    fn bracket_failure_below_ground_energy() {
        let ev = ed3();
        let e0 = ev.table(1.0).unwrap().ground_energy();
        let eq = QuenchEnergy {
            e_q: e0 - 1.0,
            de_q: 0.0,
            h_i: 1.0,
            t_i: Some(1.0),
            h_f: 1.0,
            zz_mean: 0.0,
            x_mean: 0.0,
        };
        let err = solve_tf(1.0, &eq, &ev, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BracketFailure { .. }), "{err}");
    }

    fn fake_bisection(t_f: f64, err_at: f64) -> Bisection {
        Bisection {
            t_f,
            interval: (t_f - 0.01, t_f + 0.01),
            n_steps: 5,
            converged: true,
            at_t_f: Evaluation {
                t: t_f,
                energy: 0.0,
                err: err_at,
                precision: Precision::Full,
            },
            trail: Vec::new(),
        }
    }

    fn ev(t: f64, energy: f64, err: f64) -> Evaluation {
        Evaluation {
            t,
            energy,
            err,
            precision: Precision::Full,
        }
    }

    fn eq_with(de_q: f64) -> QuenchEnergy {
        QuenchEnergy {
            e_q: 0.0,
            de_q,
            h_i: 1.0,
            t_i: Some(1.0),
            h_f: 2.0,
            zz_mean: 0.0,
            x_mean: 0.0,
        }
    }

    #[test]
    fn bounds_propagate_linearly() {
        let bis = fake_bisection(1.0, 0.0);
        let extra = [ev(0.98, -0.2, 0.0), ev(1.02, 0.2, 0.0)];
        assert_eq!(tf_bounds(&bis, &eq_with(0.0), &extra).unwrap(), (1.0, 1.0));
        let (lo1, hi1) = tf_bounds(&bis, &eq_with(0.05), &extra).unwrap();
        let (lo2, hi2) = tf_bounds(&bis, &eq_with(0.1), &extra).unwrap();
        assert!(((hi2 - lo2) / (hi1 - lo1) - 2.0).abs() < 1e-12);
        assert!((hi1 - 1.0 - 0.05 / 10.0).abs() < 1e-12);
        assert!(tf_bounds(&bis, &eq_with(0.1), &extra[..1]).is_err());
    }

    #[test]
    fn flat_slope_widens_to_interval() {
        let bis = fake_bisection(1.0, 0.1);
        let extra = [ev(0.98, -0.01, 0.1), ev(1.02, 0.01, 0.1)];
        assert_eq!(tf_bounds(&bis, &eq_with(0.1), &extra).unwrap(), (0.99, 1.01));
    }

    #[test]
    fn slope_matches_heat_capacity() {
        let evr = ed3();
        let table = evr.table(2.5).unwrap();
        for t_star in [0.6, 1.3, 2.7] {
            let d = 1e-3;
            let lo = evr.energy(2.5, t_star * (1.0 - d), Precision::Full).unwrap();
            let hi = evr.energy(2.5, t_star * (1.0 + d), Precision::Full).unwrap();
            let slope = (hi.energy - lo.energy) / (hi.t - lo.t);
            let c = table.heat_capacity(t_star).unwrap();
            assert!((slope / c - 1.0).abs() < 1e-4, "T={t_star}: {slope} vs {c}");
        }
    }

    #[test]
    fn curve_rejects_unsorted_grid_and_records_failures() {
        let evr = ed3();
        let init = evr.initial(1.0, InitialState::Thermal { t: 1.0 }).unwrap();
        assert!(tf_curve(&init, &[1.0, 0.5], &evr, &SolveOptions::default()).is_err());
        let opts = SolveOptions {
            bracket: Some((5.0, 6.0)),
            max_expansions: 0,
            ..Default::default()
        };
        let c = tf_curve(&init, &[0.5, 1.0], &evr, &opts).unwrap();
        assert!(c.points.iter().all(|p| p.result.is_none() && p.error.is_some()));
    }
}
