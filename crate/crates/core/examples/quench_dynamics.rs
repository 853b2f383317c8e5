//! Exact real-time evolution after a quench on the 3x3 torus, compared with the
//! diagonal ensemble and the thermal value at the exact final temperature.
//!
//! `cargo run --release --example quench_dynamics -- [h_i] [T_i] [h_f] [t_max]`

use tfim_quench::dynamics::{time_grid, QuenchDynamics, TfSource};
use tfim_quench::ed::{EdLimits, ObservableKind};
use tfim_quench::lattice::QuenchSpec;

fn main() -> tfim_quench::error::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let arg = |k: usize, d: f64| args.get(k).copied().unwrap_or(d);
    let (h_i, t_i, h_f, t_max) = (arg(0, 2.0), arg(1, 1.0), arg(2, 3.0), arg(3, 200.0));

    let d = QuenchDynamics::new(3, 1.0, QuenchSpec::thermal(h_i, t_i, h_f)?, &EdLimits::default())?;
    let t_f = d.exact_final_temperature()?;
    println!("h_i = {h_i}, T_i = {t_i} -> h_f = {h_f}: E_q = {:.6}, T_f = {t_f:.6}", d.quench_energy()?);

    let times = time_grid(t_max, 4001);
    for obs in [ObservableKind::M2, ObservableKind::Cnn] {
        let series = d.evolve(obs, &times)?;
        let pred = d.steady_state_prediction(obs, TfSource::EdExact)?;
        let cmp = d.compare_tail(&series, t_max / 2.0, &pred)?;
        println!("{obs:?}");
        for k in (0..times.len()).step_by(400) {
            println!("  t = {:7.2}  value {:.6}", series.times[k], series.values[k]);
        }
        println!(
            "  time average {:.6}, tail {:.6} +- {:.6}, diagonal ensemble {:.6}, thermal {:.6}, gap {:+.3e}",
            series.running_mean().last().copied().unwrap_or(f64::NAN),
            cmp.tail_mean,
            cmp.tail_std,
            cmp.diagonal_ensemble,
            cmp.prediction,
            cmp.eth_gap
        );
    }
    Ok(())
}
