//! Exact spectrum of a small lattice: ground state and thermal averages.
//!
//! `cargo run --release --example ed_spectrum -- [L] [h]`

use std::time::Instant;

use tfim_quench::ed::{diagonalize, EdLimits, EigenTable, ObservableKind};
use tfim_quench::lattice::{build_lattice, ModelParams};

fn main() -> tfim_quench::error::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let l: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let h: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let lattice = build_lattice(l)?;
    let start = Instant::now();
    let spectra = diagonalize(&lattice, &ModelParams::new(1.0, h)?, true, &EdLimits::default())?;
    println!("L={l} h={h}: {} sectors in {:.2?}", spectra.len(), start.elapsed());
    let obs = [ObservableKind::ZzBondSum, ObservableKind::XSum, ObservableKind::M2];
    let table = EigenTable::new(&spectra, &obs)?;
    println!("E0 = {:.10}", table.ground_energy());
    println!("{:>6} {:>14} {:>14} {:>14} {:>10}", "T", "E", "zz", "x", "m2");
    for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let e = table.thermal(t, ObservableKind::TotalEnergy)?;
        let zz = table.thermal(t, ObservableKind::ZzBondSum)?;
        let x = table.thermal(t, ObservableKind::XSum)?;
        let m2 = table.thermal(t, ObservableKind::M2)?;
        println!("{t:>6.2} {e:>14.8} {zz:>14.8} {x:>14.8} {m2:>10.6}");
    }
    Ok(())
}
