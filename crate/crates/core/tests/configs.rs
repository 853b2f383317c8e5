use std::path::Path;

use tfim_quench::io::config::{Command, RunConfig};

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let cases = [
        ("equilibrium_l3.toml", Command::Equilibrium),
        ("tf_curve_l12.toml", Command::TfCurve),
        ("critical_line.toml", Command::CriticalLine),
        ("phase_diagram_l8.toml", Command::PhaseDiagram),
        ("dynamics_l3.toml", Command::Dynamics),
        ("fss.toml", Command::Fss),
    ];
    for (file, cmd) in cases {
        let cfg = RunConfig::load(&dir.join(file), &[]).unwrap_or_else(|e| panic!("{file}: {e}"));
        cfg.validate(cmd).unwrap_or_else(|e| panic!("{file}: {e}"));
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap(), &[]).unwrap();
        assert_eq!(again, cfg, "{file}");
    }
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), cases.len());
}
