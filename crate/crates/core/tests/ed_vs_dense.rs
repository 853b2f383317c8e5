mod common;

use common::Oracle;
use proptest::prelude::*;
use tfim_quench::ed::{diagonalize, EdLimits, EigenTable, ObservableKind};
use tfim_quench::lattice::{build_lattice, ModelParams};

const KINDS: [ObservableKind; 5] = [
    ObservableKind::TotalEnergy,
    ObservableKind::ZzBondSum,
    ObservableKind::XSum,
    ObservableKind::M2,
    ObservableKind::M4,
];

fn table(h: f64, use_symmetry: bool) -> EigenTable {
    let lattice = build_lattice(3).unwrap();
    let spectra = diagonalize(&lattice, &ModelParams::new(1.0, h).unwrap(), use_symmetry, &EdLimits::default()).unwrap();
    EigenTable::new(&spectra, &KINDS).unwrap()
}

#[test]
fn sector_spectrum_is_the_dense_spectrum() {
    for h in [0.0, 0.7, 3.044] {
        let mut ours = table(h, true).energies;
        ours.sort_by(f64::total_cmp);
        let mut dense: Vec<f64> = Oracle::new(3, 1.0, h).eig.eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        assert_eq!(ours.len(), 512);
        for (a, b) in ours.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-9, "h={h}: {a} vs {b}");
        }
    }
}

#[test]
fn partition_function_matches_dense_basis() {
    for (h, t) in [(0.5, 0.3), (2.0, 1.0), (3.0, 5.0)] {
        let o = Oracle::new(3, 1.0, h);
        let z: f64 = o.eig.eigenvalues.iter().map(|e| (-e / t).exp()).sum();
        let ln_z = table(h, true).log_partition(t).unwrap();
        assert!((ln_z - z.ln()).abs() <= 1e-9 * z.ln().abs(), "{ln_z} vs {}", z.ln());
    }
}

#[test]
fn magnetization_vanishes_in_every_thermal_state() {
    let lattice = build_lattice(3).unwrap();
    for h in [0.3, 2.0] {
        let spectra = diagonalize(&lattice, &ModelParams::new(1.0, h).unwrap(), false, &EdLimits::default()).unwrap();
        let t = EigenTable::new(&spectra, &[ObservableKind::ZSum]).unwrap();
        for temp in [0.2, 1.0, 4.0] {
            assert!(t.thermal(temp, ObservableKind::ZSum).unwrap().abs() < 1e-9);
        }
    }
}

#[test]
fn ground_state_of_the_classical_point_is_the_ordered_doublet() {
    let g = table(0.0, true).ground_state(ObservableKind::M2).unwrap();
    assert_eq!(g.degeneracy, 2);
    assert!((g.energy + 18.0).abs() < 1e-12);
    assert!((g.value - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn thermal_values_match_dense(h in 0.0f64..4.0, t in 0.2f64..6.0) {
        let ours = table(h, true);
        let o = Oracle::new(3, 1.0, h).thermal(t);
        let want = [o.energy, o.zz, o.x, o.m2, o.m4];
        for (k, w) in KINDS.iter().zip(want) {
            let got = ours.thermal(t, *k).unwrap();
            prop_assert!((got - w).abs() <= 1e-9 * w.abs().max(1.0), "{k:?}: {got} vs {w}");
        }
        prop_assert!((ours.thermal(t, ObservableKind::Identity).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_and_reduced_bases_agree(h in 0.0f64..4.0, t in 0.2f64..6.0) {
        let (a, b) = (table(h, true), table(h, false));
        for k in KINDS {
            let (x, y) = (a.thermal(t, k).unwrap(), b.thermal(t, k).unwrap());
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}
