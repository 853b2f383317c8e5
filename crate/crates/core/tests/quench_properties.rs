mod common;

use common::{invert_energy, Oracle};
use proptest::prelude::*;
use tfim_quench::dynamics::{time_grid, QuenchDynamics};
use tfim_quench::ed::{EdLimits, ObservableKind};
use tfim_quench::lattice::{InitialState, QuenchSpec, ThermalPoint};
use tfim_quench::phase::{classify, CriticalLine, Phase};
use tfim_quench::quench::{solve_tf, tf_curve, EdEvaluator, EnergyEvaluator, SolveOptions};

fn ed3() -> EdEvaluator {
    EdEvaluator::new(3, 1.0, &EdLimits::default()).unwrap()
}

#[test]
fn quench_energy_is_affine_in_final_field() {
    let eval = ed3();
    let init = eval.initial(1.7, InitialState::Thermal { t: 0.9 }).unwrap();
    let e: Vec<f64> = [0.5, 1.5, 4.0].iter().map(|&h| init.quench_energy(h).unwrap().e_q).collect();
    let slope = (e[1] - e[0]) / 1.0;
    assert!((e[2] - (e[0] + 3.5 * slope)).abs() < 1e-10);
    assert!((slope + init.x.mean).abs() < 1e-10);
}

#[test]
fn exact_curve_has_no_jumps() {
    let eval = ed3();
    let init = eval.initial(2.0, InitialState::Thermal { t: 1.2 }).unwrap();
    let grid: Vec<f64> = (0..=16).map(|k| 0.25 * k as f64).collect();
    let curve = tf_curve(&init, &grid, &eval, &SolveOptions::default()).unwrap();
    let t: Vec<f64> = curve.solved().map(|r| r.t_f).collect();
    assert_eq!(t.len(), grid.len());
    let slopes: Vec<f64> = t.windows(2).map(|w| (w[1] - w[0]).abs() / 0.25).collect();
    for k in 1..slopes.len() {
        let local = slopes[k - 1].max(slopes.get(k + 1).copied().unwrap_or(0.0)).max(0.05);
        assert!(slopes[k] <= 3.0 * local + 1e-9, "jump at h_f = {}", grid[k]);
    }
}

#[test]
fn ground_state_quench_is_bounded_below() {
    let eval = ed3();
    let init = eval.initial(0.0, InitialState::GroundState).unwrap();
    let r = solve_tf(1.0, &init.quench_energy(1.0).unwrap(), &eval, &SolveOptions::default()).unwrap();
    let t_star = invert_energy(&Oracle::new(3, 1.0, 1.0), -18.0);
    assert!((r.t_f - t_star).abs() < 1e-6, "{} vs {t_star}", r.t_f);
}

#[test]
fn evolution_conserves_energy_and_respects_the_m2_floor() {
    let d = QuenchDynamics::new(3, 1.0, QuenchSpec::thermal(0.5, 0.8, 2.5).unwrap(), &EdLimits::default()).unwrap();
    let times = time_grid(30.0, 61);
    let e = d.evolve(ObservableKind::TotalEnergy, &times).unwrap();
    let e_q = d.quench_energy().unwrap();
    assert!(e.values.iter().all(|v| (v - e_q).abs() < 1e-9 * e_q.abs()));
    let m2 = d.evolve(ObservableKind::M2, &times).unwrap();
    assert!(m2.values.iter().all(|&v| (1.0 / 9.0 - 1e-12..=1.0 + 1e-12).contains(&v)));
    assert!(m2.max_imag < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solved_temperature_lies_in_its_bounds(h_i in 0.2f64..3.5, t_i in 0.4f64..3.0, h_f in 0.2f64..3.5) {
        let eval = ed3();
        let init = eval.initial(h_i, InitialState::Thermal { t: t_i }).unwrap();
        let r = solve_tf(h_f, &init.quench_energy(h_f).unwrap(), &eval, &SolveOptions::default()).unwrap();
        prop_assert!(r.t_lo <= r.t_f && r.t_f <= r.t_hi);
        prop_assert!(r.trail.len() <= 60 + 2 + 6 + 1);
        let evals: Vec<_> = r.trail.iter().chain(&r.extra).collect();
        for a in &evals {
            for b in &evals {
                if a.t < b.t {
                    prop_assert!(a.energy <= b.energy + 1e-9);
                }
            }
        }
    }

    #[test]
    fn classification_follows_the_line(h in 0.0f64..2.9, eps in 0.05f64..0.5) {
        let line = CriticalLine::from_nodes(&[(1.0, 2.0), (2.0, 1.5), (2.8, 0.8)]).unwrap();
        let t_c = line.t_c_at(h);
        let band = line.sigma_at(h) + eps;
        prop_assert_eq!(classify(ThermalPoint::new(h, t_c + band).unwrap(), &line), Phase::Pm);
        if t_c - band > 0.0 {
            prop_assert_eq!(classify(ThermalPoint::new(h, t_c - band).unwrap(), &line), Phase::Fm);
        }
    }
}
