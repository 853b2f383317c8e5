//! Equilibrium critical line, phase classification, dynamical critical points
//! and finite-size scaling of post-quench temperatures.

mod binder;
mod fss;
pub mod interp;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use binder::{binder_crossing_tc, build_critical_line, write_line_csv, Crossing, CrossingOptions};
pub use fss::{fss_fit, FssFit, FssPoint};
use interp::{roots, Pchip};

use crate::error::{Error, Result};
use crate::lattice::{InitialState, ThermalPoint};
use crate::quench::{fmt, tf_curve, EnergyEvaluator, SolveOptions, TfCurve};

/// Zero-field critical temperature of the square-lattice Ising model, `2 / ln(1 + sqrt 2)`.
pub const T_C_ONSAGER: f64 = 2.269_185_314_213_022;
/// Zero-temperature critical field.
pub const H_C_QUANTUM: f64 = 3.044;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LineData {
    h: Vec<f64>,
    t_c: Vec<f64>,
    sigma: Vec<f64>,
    crossings: Vec<Crossing>,
}

/// `T_c(h)` from `h = 0` to the quantum critical field, monotone decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LineData", into = "LineData")]
pub struct CriticalLine {
    pub h: Vec<f64>,
    pub t_c: Vec<f64>,
    /// 1-sigma uncertainty of each node.
    pub sigma: Vec<f64>,
    /// Raw crossings the line was built from.
    pub crossings: Vec<Crossing>,
    interp: Pchip,
}

impl TryFrom<LineData> for CriticalLine {
    type Error = Error;
    fn try_from(d: LineData) -> Result<Self> {
        CriticalLine::new(d.h, d.t_c, d.sigma, d.crossings)
    }
}

impl From<CriticalLine> for LineData {
    fn from(l: CriticalLine) -> Self {
        LineData {
            h: l.h,
            t_c: l.t_c,
            sigma: l.sigma,
            crossings: l.crossings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "FM")]
    Fm,
    #[serde(rename = "PM")]
    Pm,
    /// Within the line's uncertainty band.
    #[serde(rename = "boundary")]
    Boundary,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Fm => "FM",
            Phase::Pm => "PM",
            Phase::Boundary => "boundary",
        }
    }
}

impl CriticalLine {
    pub fn new(h: Vec<f64>, t_c: Vec<f64>, sigma: Vec<f64>, crossings: Vec<Crossing>) -> Result<Self> {
        if h.len() != t_c.len() || h.len() != sigma.len() {
            return Err(Error::invalid("critical line columns differ in length"));
        }
        if t_c.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::DataQuality("critical line must decrease strictly in h".into()));
        }
        let interp = Pchip::new(&h, &t_c)?;
        Ok(Self {
            h,
            t_c,
            sigma,
            crossings,
            interp,
        })
    }

    /// Line through the two anchors and the given interior nodes (no uncertainty).
    pub fn from_nodes(nodes: &[(f64, f64)]) -> Result<Self> {
        let mut h = vec![0.0];
        let mut t = vec![T_C_ONSAGER];
        for &(a, b) in nodes {
            h.push(a);
            t.push(b);
        }
        h.push(H_C_QUANTUM);
        t.push(0.0);
        let n = h.len();
        Self::new(h, t, vec![0.0; n], Vec::new())
    }

    pub fn h_c(&self) -> f64 {
        *self.h.last().unwrap()
    }

    /// `T_c(h)`; zero at and beyond the quantum critical field.
    pub fn t_c_at(&self, h: f64) -> f64 {
        if h >= self.h_c() {
            return 0.0;
        }
        self.interp.eval(h.max(0.0)).max(0.0)
    }

    /// Node uncertainty, linearly interpolated.
    pub fn sigma_at(&self, h: f64) -> f64 {
        if h <= self.h[0] {
            return self.sigma[0];
        }
        if h >= self.h_c() {
            return *self.sigma.last().unwrap();
        }
        let k = self.h.partition_point(|&v| v <= h) - 1;
        let s = (h - self.h[k]) / (self.h[k + 1] - self.h[k]);
        self.sigma[k] * (1.0 - s) + self.sigma[k + 1] * s
    }

    pub fn classify(&self, point: ThermalPoint) -> Phase {
        classify(point, self)
    }
}

/// FM below the line, PM above it or beyond the quantum critical field, and
/// `Boundary` within one sigma of the line.
pub fn classify(point: ThermalPoint, line: &CriticalLine) -> Phase {
    if point.h >= line.h_c() {
        return Phase::Pm;
    }
    let t_c = line.t_c_at(point.h);
    if (point.t - t_c).abs() <= line.sigma_at(point.h) {
        Phase::Boundary
    } else if point.t < t_c {
        Phase::Fm
    } else {
        Phase::Pm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicalCriticalPoint {
    pub h_c: f64,
    pub h_lo: f64,
    pub h_hi: f64,
    /// 1-based, counted in ascending `h_f`.
    pub branch: usize,
}

/// Sign changes of `T_f(h_f) - T_c(h_f)` along monotone-cubic interpolants of
/// the solved points. Bounds come from where the `T_lo` and `T_hi` interpolants
/// cross the line nearest to each crossing.
pub fn dynamical_critical_points(curve: &TfCurve, line: &CriticalLine) -> Vec<DynamicalCriticalPoint> {
    let pts: Vec<_> = curve.solved().collect();
    if pts.len() < 2 {
        return Vec::new();
    }
    let hs: Vec<f64> = pts.iter().map(|r| r.h_f).collect();
    let build = |f: &dyn Fn(&crate::quench::TfResult) -> f64| Pchip::new(&hs, &pts.iter().map(|r| f(r)).collect::<Vec<_>>());
    let (Ok(mid), Ok(lo), Ok(hi)) = (build(&|r| r.t_f), build(&|r| r.t_lo), build(&|r| r.t_hi)) else {
        return Vec::new();
    };
    let (a, b) = (hs[0], hs[hs.len() - 1]);
    let n = 64 * hs.len();
    let r_mid = roots(|h| mid.eval(h) - line.t_c_at(h), a, b, n);
    let r_lo = roots(|h| lo.eval(h) - line.t_c_at(h), a, b, n);
    let r_hi = roots(|h| hi.eval(h) - line.t_c_at(h), a, b, n);
    let nearest = |rs: &[f64], x: f64| rs.iter().copied().min_by(|p, q| (p - x).abs().total_cmp(&(q - x).abs()));
    r_mid
        .iter()
        .enumerate()
        .map(|(k, &h_c)| {
            let mut h_lo = h_c;
            let mut h_hi = h_c;
            for c in [nearest(&r_lo, h_c), nearest(&r_hi, h_c)].into_iter().flatten() {
                h_lo = h_lo.min(c);
                h_hi = h_hi.max(c);
            }
            DynamicalCriticalPoint {
                h_c,
                h_lo,
                h_hi,
                branch: k + 1,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub h_f: f64,
    pub t_f: Option<f64>,
    pub t_lo: Option<f64>,
    pub t_hi: Option<f64>,
    pub phase: Option<Phase>,
    pub cooling: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub t_i: f64,
    pub cells: Vec<PhaseCell>,
    pub critical_points: Vec<DynamicalCriticalPoint>,
    pub curve: Option<TfCurve>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicalPhaseDiagram {
    pub h_i: f64,
    pub l: usize,
    pub t_i_grid: Vec<f64>,
    pub h_f_grid: Vec<f64>,
    pub rows: Vec<PhaseRow>,
    pub line: CriticalLine,
    /// `h_f` values where a higher `T_i` is FM while a lower one is PM; recorded, not enforced.
    pub nesting_violations: Vec<(f64, f64)>,
}

/// One `T_f` curve per `T_i`, each cell classified against `line`.
pub fn phase_diagram(
    h_i: f64,
    t_i_grid: &[f64],
    h_f_grid: &[f64],
    evaluator: &dyn EnergyEvaluator,
    line: &CriticalLine,
    opts: &SolveOptions,
) -> Result<DynamicalPhaseDiagram> {
    let l = evaluator.lattice_size();
    if t_i_grid.is_empty() || t_i_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("T_i grid must be nonempty and strictly increasing"));
    }
    if t_i_grid[0] < 1.0 / l as f64 - 1e-12 {
        return Err(Error::invalid(format!("lowest T_i is 1/L = {}, got {}", 1.0 / l as f64, t_i_grid[0])));
    }
    let mut rows = Vec::with_capacity(t_i_grid.len());
    for &t_i in t_i_grid {
        let curve = evaluator
            .initial(h_i, InitialState::Thermal { t: t_i })
            .and_then(|init| tf_curve(&init, h_f_grid, evaluator, opts));
        rows.push(match curve {
            Ok(curve) => {
                let cells = curve
                    .points
                    .iter()
                    .map(|p| match &p.result {
                        Some(r) => PhaseCell {
                            h_f: p.h_f,
                            t_f: Some(r.t_f),
                            t_lo: Some(r.t_lo),
                            t_hi: Some(r.t_hi),
                            phase: ThermalPoint::new(p.h_f, r.t_f).ok().map(|tp| classify(tp, line)),
                            cooling: r.cooling,
                            error: None,
                        },
                        None => PhaseCell {
                            h_f: p.h_f,
                            t_f: None,
                            t_lo: None,
                            t_hi: None,
                            phase: None,
                            cooling: false,
                            error: p.error.clone(),
                        },
                    })
                    .collect();
                PhaseRow {
                    t_i,
                    cells,
                    critical_points: dynamical_critical_points(&curve, line),
                    curve: Some(curve),
                    error: None,
                }
            }
            Err(e) => PhaseRow {
                t_i,
                cells: Vec::new(),
                critical_points: Vec::new(),
                curve: None,
                error: Some(e.to_string()),
            },
        });
    }
    let mut nesting_violations = Vec::new();
    for w in rows.windows(2) {
        for (lo, hi) in w[0].cells.iter().zip(&w[1].cells) {
            if lo.phase == Some(Phase::Pm) && hi.phase == Some(Phase::Fm) {
                nesting_violations.push((lo.h_f, w[1].t_i));
            }
        }
    }
    Ok(DynamicalPhaseDiagram {
        h_i,
        l,
        t_i_grid: t_i_grid.to_vec(),
        h_f_grid: h_f_grid.to_vec(),
        rows,
        line: line.clone(),
        nesting_violations,
    })
}

impl DynamicalPhaseDiagram {
    /// Columns `schema_version,T_i,h_f,T_f,T_lo,T_hi,phase,cooling_flag,error`.
    pub fn write_cells_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["schema_version", "T_i", "h_f", "T_f", "T_lo", "T_hi", "phase", "cooling_flag", "error"])?;
        let v = crate::io::SCHEMA_VERSION.to_string();
        let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
        for row in &self.rows {
            for c in &row.cells {
                w.write_record([
                    v.clone(),
                    fmt(row.t_i),
                    fmt(c.h_f),
                    opt(c.t_f),
                    opt(c.t_lo),
                    opt(c.t_hi),
                    c.phase.map(|p| p.label().to_string()).unwrap_or_default(),
                    (c.cooling as u8).to_string(),
                    c.error.clone().or_else(|| row.error.clone()).unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `schema_version,T_i,branch,h_c_d,h_lo,h_hi`.
    pub fn write_boundary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["schema_version", "T_i", "branch", "h_c_d", "h_lo", "h_hi"])?;
        let v = crate::io::SCHEMA_VERSION.to_string();
        for row in &self.rows {
            for p in &row.critical_points {
                w.write_record([
                    v.clone(),
                    fmt(row.t_i),
                    p.branch.to_string(),
                    fmt(p.h_c),
                    fmt(p.h_lo),
                    fmt(p.h_hi),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
