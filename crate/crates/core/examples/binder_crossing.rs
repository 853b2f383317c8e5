//! Binder-cumulant crossing temperature at one field.
//!
//! `cargo run --release --example binder_crossing -- [h] [L_small] [L_large]`

use std::time::Instant;

use tfim_quench::phase::{binder_crossing_tc, CrossingOptions, T_C_ONSAGER};
use tfim_quench::qmc::{QmcRunner, SweepSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let h: f64 = args.first().map_or(Ok(0.0), |s| s.parse())?;
    let small: usize = args.get(1).map_or(Ok(8), |s| s.parse())?;
    let large: usize = args.get(2).map_or(Ok(16), |s| s.parse())?;

    let runner = QmcRunner::new(SweepSettings::default());
    let start = Instant::now();
    let c = binder_crossing_tc(&runner, h, (small, large), &CrossingOptions::default())?;
    println!("coarse scan (T, U_large - U_small):");
    for p in &c.scan {
        println!("  {:.3}  {:+.4} +- {:.4}", p.t, p.delta_u, p.delta_u_err);
    }
    println!("refinement:");
    for p in &c.refinement {
        println!("  {:.5}  {:+.4} +- {:.4}", p.t, p.delta_u, p.delta_u_err);
    }
    println!("h = {h}: T_c = {:.4} +- {:.4}  ({} steps)", c.t_c, c.sigma, c.n_steps);
    if h == 0.0 {
        println!("relative deviation from 2/ln(1+sqrt 2): {:.3}%", 100.0 * (c.t_c / T_C_ONSAGER - 1.0));
    }
    let (runs, hits) = runner.counters();
    println!("{runs} QMC runs, {hits} reused, {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
