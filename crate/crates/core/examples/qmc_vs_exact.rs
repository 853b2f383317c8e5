//! SSE estimates on the 3x3 torus next to exact thermal values.
//!
//! `cargo run --release --example qmc_vs_exact -- [h] [T]`

use std::time::Instant;

use tfim_quench::ed::{diagonalize, EdLimits, EigenTable, ObservableKind};
use tfim_quench::lattice::{build_lattice, ModelParams};
use tfim_quench::qmc::{run_qmc, Observable, QmcConfig};

fn main() -> tfim_quench::error::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let points: Vec<(f64, f64)> = if args.len() >= 2 {
        vec![(args[0], args[1])]
    } else {
        vec![(1.0, 0.5), (2.0, 1.0), (3.0, 2.0)]
    };
    let lattice = build_lattice(3)?;
    let pairs = [
        (Observable::TotalEnergy, ObservableKind::TotalEnergy),
        (Observable::ZzBondSum, ObservableKind::ZzBondSum),
        (Observable::XSum, ObservableKind::XSum),
        (Observable::M2, ObservableKind::M2),
        (Observable::M4, ObservableKind::M4),
    ];
    for (h, t) in points {
        let spectra = diagonalize(&lattice, &ModelParams::new(1.0, h)?, true, &EdLimits::default())?;
        let kinds: Vec<ObservableKind> = pairs.iter().map(|p| p.1).collect();
        let table = EigenTable::new(&spectra, &kinds)?;
        let start = Instant::now();
        let est = run_qmc(&QmcConfig::new(3, h, t).with_seed(1))?;
        println!("h={h} T={t}  ({:.2?}, <n>={:.1})", start.elapsed(), est.diagnostics.mean_operators);
        for (obs, kind) in pairs {
            let e = est.get(obs);
            let exact = table.thermal(t, kind)?;
            println!(
                "  {:<13} {:>12.6} +- {:<10.2e} exact {:>12.6}  z={:+.2}",
                obs.name(),
                e.mean,
                e.stderr,
                exact,
                (e.mean - exact) / e.stderr
            );
        }
        let (m2, m4) = (table.thermal(t, ObservableKind::M2)?, table.thermal(t, ObservableKind::M4)?);
        let u = 1.0 - m4 / (3.0 * m2 * m2);
        let b = est.binder_u;
        println!("  {:<13} {:>12.6} +- {:<10.2e} exact {:>12.6}  z={:+.2}", "binder_U", b.mean, b.stderr, u, (b.mean - u) / b.stderr);
    }
    Ok(())
}
