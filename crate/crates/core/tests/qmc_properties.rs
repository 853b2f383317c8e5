mod common;

use common::Oracle;
use tfim_quench::qmc::{run_qmc, Observable, QmcConfig};

fn short(l: usize, h: f64, t: f64, seed: u64) -> QmcConfig {
    QmcConfig::new(l, h, t).with_seed(seed).with_sweeps(2_000, 25_600)
}

#[test]
fn identical_config_gives_identical_estimates() {
    let cfg = short(3, 1.5, 1.0, 11);
    assert_eq!(run_qmc(&cfg).unwrap(), run_qmc(&cfg).unwrap());
}

#[test]
fn energy_decomposes_into_bond_and_field_terms() {
    for (h, t) in [(1.0, 0.5), (2.5, 1.0), (3.5, 2.0)] {
        let est = run_qmc(&short(4, h, t, 3)).unwrap();
        let (e, zz, x) = (
            est.get(Observable::TotalEnergy),
            est.get(Observable::ZzBondSum),
            est.get(Observable::XSum),
        );
        let recon = -zz.mean - h * x.mean;
        let tol = 3.0 * (e.stderr.powi(2) + zz.stderr.powi(2) + (h * x.stderr).powi(2)).sqrt();
        assert!((recon - e.mean).abs() <= tol, "h={h} T={t}: {recon} vs {}", e.mean);
    }
}

#[test]
fn classical_path_matches_exact_at_zero_field() {
    let o = Oracle::new(3, 1.0, 0.0);
    for t in [1.5, 2.5, 4.0] {
        let est = run_qmc(&short(3, 0.0, t, 9)).unwrap();
        let exact = o.thermal(t);
        for (obs, want) in [
            (Observable::TotalEnergy, exact.energy),
            (Observable::M2, exact.m2),
            (Observable::BinderU, exact.binder()),
        ] {
            let e = est.get(obs);
            assert!((e.mean - want).abs() <= 4.0 * e.stderr, "{obs:?} T={t}: {} +- {} vs {want}", e.mean, e.stderr);
        }
        assert_eq!(est.get(Observable::XSum).mean, 0.0);
    }
}

#[test]
fn quadrupling_sweeps_halves_errors() {
    let base = QmcConfig::new(3, 2.0, 1.0).with_seed(21);
    let small = run_qmc(&base.clone().with_sweeps(5_000, 25_600)).unwrap();
    let large = run_qmc(&base.with_sweeps(5_000, 102_400)).unwrap();
    for obs in [Observable::TotalEnergy, Observable::XSum, Observable::M2] {
        let ratio = small.get(obs).stderr / large.get(obs).stderr;
        assert!((2.0 / 1.5..=2.0 * 1.5).contains(&ratio), "{obs:?}: ratio {ratio}");
    }
}

#[test]
fn errors_are_finite_and_nonnegative() {
    let est = run_qmc(&short(4, 3.0, 0.4, 1)).unwrap();
    for obs in Observable::ALL {
        let e = est.get(obs);
        assert!(e.mean.is_finite() && e.stderr.is_finite() && e.stderr >= 0.0, "{obs:?}: {e:?}");
    }
}
