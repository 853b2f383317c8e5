//! Long-running reproduction of the dynamical critical field for `h_i = 0`,
//! `T_i = 1/L` at full size (default L = 24). Expect many hours on one core.
//!
//! `cargo run --release --example full_scale_hcd -- [L] [cache_dir]`
//!
//! QMC results are cached on disk, so an interrupted run resumes where it
//! stopped. Prints the critical line, the T_f curve and h_c^d with its bounds.

use std::sync::Arc;

use tfim_quench::lattice::InitialState;
use tfim_quench::phase::{build_critical_line, dynamical_critical_points, CrossingOptions};
use tfim_quench::qmc::{QmcRunner, SweepSettings};
use tfim_quench::quench::{tf_curve, EnergyEvaluator, QmcEvaluator, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let l: usize = args.first().map_or(Ok(24), |s| s.parse())?;
    let cache = args.get(1).cloned().unwrap_or_else(|| ".tfim-cache".into());
    let runner = Arc::new(QmcRunner::new(SweepSettings::default()).with_cache_dir(cache));

    let line = build_critical_line(
        &runner,
        &[0.5, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 2.75],
        (l / 2, l),
        &CrossingOptions::default(),
    )?;
    for ((h, t), s) in line.h.iter().zip(&line.t_c).zip(&line.sigma) {
        println!("T_c({h}) = {t:.4} +- {s:.4}");
    }

    let eval = QmcEvaluator::new(Arc::clone(&runner), l);
    let initial = eval.initial(0.0, InitialState::Thermal { t: 1.0 / l as f64 })?;
    let grid: Vec<f64> = (0..=12).map(|k| 1.0 + 0.1 * k as f64).collect();
    let curve = tf_curve(&initial, &grid, &eval, &SolveOptions::default())?;
    for r in curve.solved() {
        println!("h_f = {:.2}: T_f = {:.4} [{:.4}, {:.4}]", r.h_f, r.t_f, r.t_lo, r.t_hi);
    }
    for p in dynamical_critical_points(&curve, &line) {
        println!("h_c^d = {:.3} [{:.3}, {:.3}]", p.h_c, p.h_lo, p.h_hi);
    }
    Ok(())
}
