//! Post-quench temperature curve, optionally intersected with a saved critical line.
//!
//! `cargo run --release --example tf_curve -- L h_i T_i h_f1,h_f2,... [line.json] [ed|qmc]`

use std::sync::Arc;
use std::time::Instant;

use tfim_quench::ed::EdLimits;
use tfim_quench::lattice::InitialState;
use tfim_quench::phase::{dynamical_critical_points, CriticalLine};
use tfim_quench::qmc::{QmcRunner, SweepSettings};
use tfim_quench::quench::{tf_curve, EdEvaluator, EnergyEvaluator, QmcEvaluator, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 4 {
        eprintln!("usage: tf_curve L h_i T_i h_f1,h_f2,... [line.json] [ed|qmc]");
        std::process::exit(2);
    }
    let l: usize = args[0].parse()?;
    let h_i: f64 = args[1].parse()?;
    let t_i: f64 = args[2].parse()?;
    let grid: Vec<f64> = args[3].split(',').map(str::parse).collect::<Result<_, _>>()?;
    let line: Option<CriticalLine> = match args.get(4).filter(|s| s.as_str() != "-") {
        Some(p) => Some(serde_json::from_slice(&std::fs::read(p)?)?),
        None => None,
    };
    let evaluator: Box<dyn EnergyEvaluator> = match args.get(5).map(String::as_str) {
        Some("ed") => Box::new(EdEvaluator::new(l, 1.0, &EdLimits::default())?),
        _ => Box::new(QmcEvaluator::new(Arc::new(QmcRunner::new(SweepSettings::default())), l)),
    };

    let start = Instant::now();
    let initial = evaluator.initial(h_i, InitialState::Thermal { t: t_i })?;
    let curve = tf_curve(&initial, &grid, evaluator.as_ref(), &SolveOptions::default())?;
    println!("  h_f      T_f      [T_lo, T_hi]        steps  flags        T_c(h_f)");
    for p in &curve.points {
        match &p.result {
            Some(r) => println!(
                "{:6.3}  {:8.5}  [{:8.5}, {:8.5}]  {:4}  {}{}  {}",
                r.h_f,
                r.t_f,
                r.t_lo,
                r.t_hi,
                r.n_steps,
                if r.cooling { "cooling " } else { "" },
                if r.identity { "identity" } else { "" },
                line.as_ref().map_or(String::new(), |l| format!("{:.4}", l.t_c_at(r.h_f)))
            ),
            None => println!("{:6.3}  failed: {}", p.h_f, p.error.as_deref().unwrap_or("?")),
        }
    }
    if let Some(line) = &line {
        for c in dynamical_critical_points(&curve, line) {
            println!("dynamical critical point {}: h_c = {:.4} [{:.4}, {:.4}]", c.branch, c.h_c, c.h_lo, c.h_hi);
        }
    }
    eprintln!("{:.0} s", start.elapsed().as_secs_f64());
    Ok(())
}
