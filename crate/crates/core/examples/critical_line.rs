//! Equilibrium critical line from Binder crossings on a field grid.
//!
//! `cargo run --release --example critical_line -- [out.json] [h1,h2,...] [L_small] [L_large]`

use std::time::Instant;

use tfim_quench::phase::{build_critical_line, write_line_csv, CrossingOptions};
use tfim_quench::qmc::{QmcRunner, SweepSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().cloned().unwrap_or_else(|| "critical_line.json".into());
    let grid: Vec<f64> = match args.get(1) {
        Some(s) => s.split(',').map(str::parse).collect::<Result<_, _>>()?,
        None => vec![0.5, 1.0, 1.5, 2.0, 2.5, 2.75],
    };
    let small: usize = args.get(2).map_or(Ok(8), |s| s.parse())?;
    let large: usize = args.get(3).map_or(Ok(16), |s| s.parse())?;

    let start = Instant::now();
    let runner = QmcRunner::new(SweepSettings::default());
    let line = build_critical_line(&runner, &grid, (small, large), &CrossingOptions::default())?;
    write_line_csv(&line, std::io::stdout())?;
    std::fs::write(&out, serde_json::to_vec_pretty(&line)?)?;
    eprintln!("wrote {out} in {:.0} s", start.elapsed().as_secs_f64());
    Ok(())
}
