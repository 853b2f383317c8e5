//! Equilibrium critical temperature from Binder-cumulant crossings.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CriticalLine, H_C_QUANTUM, T_C_ONSAGER};
use crate::error::{Error, Result, ScanPoint};
use crate::qmc::{Precision, QmcRunner};
use crate::quench::fmt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossingOptions {
    pub t_range: (f64, f64),
    /// Coarse probes across `t_range`.
    pub n_scan: usize,
    /// Significance (in standard errors) a probe needs to count as ordered or disordered.
    pub z: f64,
    pub max_steps: usize,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        Self {
            t_range: (0.15, 2.65),
            n_scan: 11,
            z: 2.0,
            max_steps: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub h: f64,
    pub t_c: f64,
    pub sigma: f64,
    pub l_pair: (usize, usize),
    pub n_steps: usize,
    pub scan: Vec<ScanPoint>,
    /// Full-precision probes taken while bisecting.
    pub refinement: Vec<ScanPoint>,
}

fn delta_u(runner: &QmcRunner, h: f64, t: f64, l_pair: (usize, usize), precision: Precision) -> Result<ScanPoint> {
    let (small, large) = rayon::join(
        || runner.run(l_pair.0, h, t, precision),
        || runner.run(l_pair.1, h, t, precision),
    );
    let (small, large) = (small?, large?);
    Ok(ScanPoint {
        t: large.config.t,
        delta_u: large.binder_u.mean - small.binder_u.mean,
        delta_u_err: (large.binder_u.stderr.powi(2) + small.binder_u.stderr.powi(2)).sqrt(),
    })
}

/// Temperature where `U(L_small, T) = U(L_large, T)`.
///
/// A coarse scan looks for a significantly positive difference (ordered side)
/// followed by a significantly negative one; the bracket between them is then
/// bisected at full precision until the difference is consistent with zero.
/// The uncertainty is the final difference error over the bracket slope, plus
/// half the surviving interval.
pub fn binder_crossing_tc(
    runner: &QmcRunner,
    h: f64,
    l_pair: (usize, usize),
    opts: &CrossingOptions,
) -> Result<Crossing> {
    if l_pair.0 >= l_pair.1 {
        return Err(Error::invalid(format!("need L_small < L_large, got {l_pair:?}")));
    }
    let (t_min, t_max) = opts.t_range;
    if !(t_min > 0.0 && t_max > t_min) || opts.n_scan < 2 {
        return Err(Error::invalid(format!("bad temperature range {:?}", opts.t_range)));
    }
    let temps: Vec<f64> = (0..opts.n_scan)
        .map(|k| t_min + (t_max - t_min) * k as f64 / (opts.n_scan - 1) as f64)
        .collect();
    let scan = temps
        .par_iter()
        .map(|&t| delta_u(runner, h, t, l_pair, Precision::Coarse))
        .collect::<Result<Vec<_>>>()?;

    let ordered = |p: &ScanPoint| p.delta_u > opts.z * p.delta_u_err;
    let disordered = |p: &ScanPoint| p.delta_u < -opts.z * p.delta_u_err;
    let Some(hi_idx) = scan.iter().position(|p| disordered(p) && scan.iter().any(|q| q.t < p.t && ordered(q))) else {
        return Err(Error::CrossingNotFound { h, scan });
    };
    let lo_idx = (0..hi_idx).rev().find(|&k| ordered(&scan[k])).expect("checked above");
    let (mut a, mut b) = (scan[lo_idx], scan[hi_idx]);
    let slope = (b.delta_u - a.delta_u) / (b.t - a.t);

    let mut refinement = Vec::new();
    let mut steps = 0;
    let mut mid = 0.5 * (a.t + b.t);
    let mut last_err = a.delta_u_err.max(b.delta_u_err);
    let mut converged = false;
    while steps < opts.max_steps {
        mid = 0.5 * (a.t + b.t);
        let p = delta_u(runner, h, mid, l_pair, Precision::Full)?;
        refinement.push(p);
        steps += 1;
        last_err = p.delta_u_err;
        if p.delta_u.abs() <= p.delta_u_err || b.t - a.t < 2e-6 {
            converged = true;
            break;
        }
        if p.delta_u > 0.0 {
            a = p;
        } else {
            b = p;
        }
    }
    let mut sigma = last_err / slope.abs();
    if !converged {
        sigma += 0.5 * (b.t - a.t);
    }
    Ok(Crossing {
        h,
        t_c: mid,
        sigma,
        l_pair,
        n_steps: steps,
        scan,
        refinement,
    })
}

/// Crossings on an `h` grid assembled into a monotone critical line.
///
/// Adjacent crossings that increase with `h` within their joint uncertainty are
/// pooled (weighted mean); a violation beyond it is a data-quality error.
pub fn build_critical_line(
    runner: &QmcRunner,
    h_grid: &[f64],
    l_pair: (usize, usize),
    opts: &CrossingOptions,
) -> Result<CriticalLine> {
    if h_grid.iter().any(|&h| !(0.0..=3.0).contains(&h)) {
        return Err(Error::invalid("critical-line fields must lie in [0, 3]"));
    }
    if h_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("critical-line field grid must be strictly increasing"));
    }
    let crossings = h_grid
        .iter()
        .map(|&h| binder_crossing_tc(runner, h, l_pair, opts))
        .collect::<Result<Vec<_>>>()?;
    CriticalLine::from_crossings(crossings)
}

impl CriticalLine {
    /// Assembles a line from computed crossings plus the two fixed anchors.
    pub fn from_crossings(crossings: Vec<Crossing>) -> Result<Self> {
        // pooled blocks: (mean h, weight sum, weighted T_c sum, member count)
        let mut blocks: Vec<(f64, f64, f64, usize)> = Vec::new();
        for c in crossings.iter().filter(|c| c.h > 0.0 && c.h < H_C_QUANTUM) {
            let w = 1.0 / c.sigma.max(1e-9).powi(2);
            blocks.push((c.h, w, c.t_c * w, 1));
            while blocks.len() >= 2 {
                let n = blocks.len();
                let (prev, last) = (blocks[n - 2], blocks[n - 1]);
                let (t_prev, t_last) = (prev.2 / prev.1, last.2 / last.1);
                if t_last < t_prev {
                    break;
                }
                let joint = (1.0 / prev.1 + 1.0 / last.1).sqrt();
                if t_last - t_prev > joint {
                    return Err(Error::DataQuality(format!(
                        "critical temperature rises with h: T_c = {t_prev:.4} then {t_last:.4} (joint sigma {joint:.4})"
                    )));
                }
                blocks.pop();
                let merged = (
                    (prev.0 * prev.3 as f64 + last.0 * last.3 as f64) / (prev.3 + last.3) as f64,
                    prev.1 + last.1,
                    prev.2 + last.2,
                    prev.3 + last.3,
                );
                blocks[n - 2] = merged;
            }
        }
        let mut h = vec![0.0];
        let mut t = vec![T_C_ONSAGER];
        let mut sigma = vec![0.0];
        for b in &blocks {
            let (t_b, s_b) = (b.2 / b.1, 1.0 / b.1.sqrt());
            if t_b >= T_C_ONSAGER {
                // indistinguishable from the zero-field anchor: absorbed into it
                if t_b - T_C_ONSAGER <= s_b {
                    continue;
                }
                return Err(Error::DataQuality(format!(
                    "crossing T_c = {t_b:.4} at h = {:.3} lies above the zero-field value",
                    b.0
                )));
            }
            h.push(b.0);
            t.push(b.2 / b.1);
            sigma.push(1.0 / b.1.sqrt());
        }
        h.push(H_C_QUANTUM);
        t.push(0.0);
        sigma.push(0.0);
        if t.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::DataQuality(
                "computed crossings are not below the zero-field anchor".into(),
            ));
        }
        CriticalLine::new(h, t, sigma, crossings)
    }
}

/// Columns `schema_version,h,T_c,sigma,source`.
pub fn write_line_csv<W: Write>(line: &CriticalLine, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["schema_version", "h", "T_c", "sigma", "source"])?;
    let v = crate::io::SCHEMA_VERSION.to_string();
    for k in 0..line.h.len() {
        let source = if k == 0 || k + 1 == line.h.len() { "anchor" } else { "crossing" };
        w.write_record([v.clone(), fmt(line.h[k]), fmt(line.t_c[k]), fmt(line.sigma[k]), source.into()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn crossing(h: f64, t_c: f64, sigma: f64) -> Crossing {
        Crossing {
            h,
            t_c,
            sigma,
            l_pair: (8, 16),
            n_steps: 0,
            scan: Vec::new(),
            refinement: Vec::new(),
        }
    }

    #[test]
    fn line_from_monotone_crossings_keeps_points() {
        let line = CriticalLine::from_crossings(vec![crossing(1.0, 2.0, 0.01), crossing(2.0, 1.5, 0.01)]).unwrap();
        assert_eq!(line.h, vec![0.0, 1.0, 2.0, H_C_QUANTUM]);
        assert!((line.t_c_at(0.0) - T_C_ONSAGER).abs() < 1e-12);
        assert_eq!(line.t_c_at(H_C_QUANTUM), 0.0);
        assert_eq!(line.t_c_at(4.0), 0.0);
    }

    #[test]
    fn small_violation_is_pooled_large_is_error() {
        let line = CriticalLine::from_crossings(vec![crossing(1.0, 2.0, 0.02), crossing(1.2, 2.01, 0.02)]).unwrap();
        assert_eq!(line.h.len(), 3);
        assert!((line.h[1] - 1.1).abs() < 1e-12);
        assert!((line.t_c[1] - 2.005).abs() < 1e-12);
        let err = CriticalLine::from_crossings(vec![crossing(1.0, 2.0, 0.01), crossing(1.2, 2.2, 0.01)]);
        assert!(matches!(err, Err(Error::DataQuality(_))));
    }

    #[test]
    fn deep_paramagnet_has_no_crossing() {
        let runner = QmcRunner::new(crate::qmc::SweepSettings {
            n_thermalization: 500,
            n_measure: 4000,
            ..Default::default()
        });
        let opts = CrossingOptions {
            n_scan: 4,
            t_range: (0.5, 2.5),
            ..Default::default()
        };
        match binder_crossing_tc(&runner, 5.0, (3, 4), &opts) {
            Err(Error::CrossingNotFound { h, scan }) => {
                assert_eq!(h, 5.0);
                assert_eq!(scan.len(), 4);
            }
            other => panic!("expected not-found, got {other:?}"),
        }
    }
}
