//! Dynamical phase diagram over (T_i, h_f) for a fixed initial field.
//!
//! `cargo run --release --example phase_diagram -- line.json [L] [h_i] [T_i,...] [h_f,...]`
//!
//! `line.json` is a critical line saved by the `critical_line` example. The
//! defaults (L = 8, h_i = 0, five temperatures, seven fields) take about an hour
//! on one core.

use std::sync::Arc;

use tfim_quench::phase::{phase_diagram, CriticalLine};
use tfim_quench::qmc::{QmcRunner, SweepSettings};
use tfim_quench::quench::{QmcEvaluator, SolveOptions};

fn list(s: Option<&String>, default: &[f64]) -> Result<Vec<f64>, std::num::ParseFloatError> {
    match s {
        Some(s) => s.split(',').map(str::parse).collect(),
        None => Ok(default.to_vec()),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: phase_diagram line.json [L] [h_i] [T_i,...] [h_f,...]");
        std::process::exit(2);
    };
    let line: CriticalLine = serde_json::from_slice(&std::fs::read(path)?)?;
    let l: usize = args.get(1).map_or(Ok(8), |s| s.parse())?;
    let h_i: f64 = args.get(2).map_or(Ok(0.0), |s| s.parse())?;
    let t_i = list(args.get(3), &[0.125, 0.5, 1.0, 1.5, 2.0])?;
    let h_f = list(args.get(4), &[0.5, 1.0, 1.5, 2.0, 2.5, 2.75, 3.0])?;

    let eval = QmcEvaluator::new(Arc::new(QmcRunner::new(SweepSettings::default())), l);
    let diagram = phase_diagram(h_i, &t_i, &h_f, &eval, &line, &SolveOptions::default())?;
    diagram.write_cells_csv(std::io::stdout())?;
    println!();
    diagram.write_boundary_csv(std::io::stdout())?;
    for (h, t) in &diagram.nesting_violations {
        eprintln!("warning: FM region not nested at h_f = {h}, T_i = {t}");
    }
    Ok(())
}
