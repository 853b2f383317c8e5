//! Run configuration: a TOML file with one section per command, plus
//! `section.key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::CrossingOptions;
use crate::qmc::SweepSettings;
use crate::quench::SolveOptions;

pub const ENV_OUTPUT_DIR: &str = "TFIM_QUENCH_OUTPUT_DIR";
pub const ENV_CACHE_DIR: &str = "TFIM_QUENCH_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Qmc,
    Ed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Equilibrium,
    TfCurve,
    CriticalLine,
    PhaseDiagram,
    Fss,
    Dynamics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Equilibrium => "equilibrium",
            Command::TfCurve => "tf-curve",
            Command::CriticalLine => "critical-line",
            Command::PhaseDiagram => "phase-diagram",
            Command::Fss => "fss",
            Command::Dynamics => "dynamics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub l: usize,
    pub j: f64,
    pub engine: Engine,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            l: 12,
            j: 1.0,
            engine: Engine::Qmc,
            seed: 0,
            output_dir: None,
            cache_dir: None,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_thermalization: u64,
    pub n_measure: u64,
    pub n_bins: usize,
    pub n_chains: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        let s = SweepSettings::default();
        Self {
            n_thermalization: s.n_thermalization,
            n_measure: s.n_measure,
            n_bins: s.n_bins,
            n_chains: s.n_chains,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSection {
    /// Every `(h, T)` pair of the two grids is evaluated.
    pub h: Vec<f64>,
    pub t: Vec<f64>,
}

/// Initial ensemble: thermal at `t_i`, or the ground state when `t_i` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfCurveSection {
    pub h_i: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_i: Option<f64>,
    pub h_f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalLineSection {
    pub h: Vec<f64>,
    #[serde(default = "default_l_pair")]
    pub l_pair: (usize, usize),
}

fn default_l_pair() -> (usize, usize) {
    (8, 16)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramSection {
    pub h_i: f64,
    pub t_i: Vec<f64>,
    pub h_f: Vec<f64>,
    /// JSON written by `critical-line`; when absent a line is built from `[critical_line]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_line: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FssSection {
    /// CSV with columns `L,T_f,sigma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Inline `[L, T_f, sigma]` rows, used in addition to `input`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub h_i: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_i: Option<f64>,
    pub h_f: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_n_times")]
    pub n_times: usize,
    #[serde(default = "default_observables")]
    pub observables: Vec<String>,
    /// Tail window start for the steady-state comparison; defaults to `t_max / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_from: Option<f64>,
    /// JSON written by `tf-curve` to take `T_f` from; exact inversion otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tf_source: Option<PathBuf>,
}

fn default_t_max() -> f64 {
    20.0
}
fn default_n_times() -> usize {
    401
}
fn default_observables() -> Vec<String> {
    vec!["M2".into(), "C_nn".into()]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub sweeps: SweepSection,
    pub solver: SolveOptions,
    pub crossing: CrossingOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tf_curve: Option<TfCurveSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_line: Option<CriticalLineSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_diagram: Option<PhaseDiagramSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fss: Option<FssSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsSection>,
}

/// Parses a `key=value` override value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `section.key=value` overrides to a parsed document.
pub fn apply_overrides(doc: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for ov in overrides {
        let (path, raw) = ov
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{ov}` is not of the form key=value")))?;
        let keys: Vec<&str> = path.trim().split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(Error::Config(format!("override `{ov}` has an empty key")));
        }
        let mut table = &mut *doc;
        for k in &keys[..keys.len() - 1] {
            let slot = table
                .entry(k.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = slot
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override `{ov}`: `{k}` is not a section")))?;
        }
        table.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        apply_overrides(&mut doc, overrides)?;
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            j: self.run.j,
            n_thermalization: self.sweeps.n_thermalization,
            n_measure: self.sweeps.n_measure,
            n_bins: self.sweeps.n_bins,
            n_chains: self.sweeps.n_chains,
            master_seed: self.run.seed,
        }
    }

    /// Output directory: environment variable, then config, then `tfim-output/<command>`.
    pub fn output_dir(&self, command: Command) -> PathBuf {
        std::env::var_os(ENV_OUTPUT_DIR)
            .map(PathBuf::from)
            .or_else(|| self.run.output_dir.clone())
            .unwrap_or_else(|| Path::new("tfim-output").join(command.name()))
    }

    /// Cache directory: environment variable, then config, then `.tfim-cache`.
    pub fn cache_dir(&self) -> PathBuf {
        std::env::var_os(ENV_CACHE_DIR)
            .map(PathBuf::from)
            .or_else(|| self.run.cache_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".tfim-cache"))
    }

    /// Field-level checks for `command`; failures name the offending key.
    pub fn validate(&self, command: Command) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::Config(format!("{field}: {why}")));
        let finite_nonneg = |field: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                bad(field, format!("must be finite and >= 0, got {v}"))
            }
        };
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                bad(field, format!("must be finite and > 0, got {v}"))
            }
        };
        let grid = |field: &str, g: &[f64], pos: bool| -> Result<()> {
            if g.is_empty() {
                return bad(field, "must not be empty".into());
            }
            for &v in g {
                if pos { positive(field, v)? } else { finite_nonneg(field, v)? }
            }
            if g.windows(2).any(|w| !(w[1] > w[0])) {
                return bad(field, "must be strictly increasing".into());
            }
            Ok(())
        };
        if self.run.l < 2 {
            return bad("run.l", format!("must be >= 2, got {}", self.run.l));
        }
        positive("run.j", self.run.j)?;
        if self.run.seed > i64::MAX as u64 {
            return bad("run.seed", format!("must be < 2^63 to fit a TOML integer, got {}", self.run.seed));
        }
        let s = &self.sweeps;
        if s.n_bins < 16 {
            return bad("sweeps.n_bins", format!("must be >= 16, got {}", s.n_bins));
        }
        if s.n_measure == 0 || !s.n_measure.is_multiple_of(s.n_bins as u64) {
            return bad("sweeps.n_measure", format!("must be a positive multiple of n_bins, got {}", s.n_measure));
        }
        if s.n_chains == 0 {
            return bad("sweeps.n_chains", "must be >= 1".into());
        }
        if let Some((a, b)) = self.solver.bracket {
            if !(a > 0.0 && b > a && b.is_finite()) {
                return bad("solver.bracket", format!("need 0 < T1 < T2, got ({a}, {b})"));
            }
        }
        if !(self.solver.extra_delta >= 0.0 && self.solver.extra_delta < 1.0) {
            return bad("solver.extra_delta", format!("must lie in [0, 1), got {}", self.solver.extra_delta));
        }
        let missing = |section: &str| Err(Error::Config(format!("[{section}] section is required for `{}`", command.name())));
        match command {
            Command::Equilibrium => {
                let Some(e) = &self.equilibrium else { return missing("equilibrium") };
                grid("equilibrium.h", &e.h, false)?;
                grid("equilibrium.t", &e.t, true)?;
            }
            Command::TfCurve => {
                let Some(c) = &self.tf_curve else { return missing("tf_curve") };
                finite_nonneg("tf_curve.h_i", c.h_i)?;
                if let Some(t) = c.t_i {
                    positive("tf_curve.t_i", t)?;
                } else if self.run.engine == Engine::Qmc {
                    return bad("tf_curve.t_i", "ground-state quenches need run.engine = \"ed\"".into());
                }
                grid("tf_curve.h_f", &c.h_f, false)?;
            }
            Command::CriticalLine => {
                let Some(c) = &self.critical_line else { return missing("critical_line") };
                self.check_line(c)?;
            }
            Command::PhaseDiagram => {
                let Some(p) = &self.phase_diagram else { return missing("phase_diagram") };
                finite_nonneg("phase_diagram.h_i", p.h_i)?;
                grid("phase_diagram.t_i", &p.t_i, true)?;
                grid("phase_diagram.h_f", &p.h_f, false)?;
                let floor = 1.0 / self.run.l as f64;
                if p.t_i[0] < floor - 1e-12 {
                    return bad("phase_diagram.t_i", format!("lowest T_i must be >= 1/L = {floor}, got {}", p.t_i[0]));
                }
                if p.critical_line.is_none() {
                    let Some(c) = &self.critical_line else {
                        return bad("phase_diagram.critical_line", "give a line file or a [critical_line] section".into());
                    };
                    self.check_line(c)?;
                }
            }
            Command::Fss => {
                let Some(f) = &self.fss else { return missing("fss") };
                if f.input.is_none() && f.points.is_empty() {
                    return bad("fss.points", "give fss.input or inline points".into());
                }
            }
            Command::Dynamics => {
                let Some(d) = &self.dynamics else { return missing("dynamics") };
                finite_nonneg("dynamics.h_i", d.h_i)?;
                finite_nonneg("dynamics.h_f", d.h_f)?;
                if let Some(t) = d.t_i {
                    positive("dynamics.t_i", t)?;
                }
                positive("dynamics.t_max", d.t_max)?;
                if d.n_times < 2 {
                    return bad("dynamics.n_times", format!("must be >= 2, got {}", d.n_times));
                }
                for name in &d.observables {
                    crate::io::observable_by_name(name)
                        .map_err(|_| Error::Config(format!("dynamics.observables: unknown observable `{name}`")))?;
                }
            }
        }
        Ok(())
    }

    fn check_line(&self, c: &CriticalLineSection) -> Result<()> {
        if c.h.is_empty() || c.h.iter().any(|h| !(0.0..=3.0).contains(h)) {
            return Err(Error::Config("critical_line.h: fields must lie in [0, 3]".into()));
        }
        if c.h.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("critical_line.h: must be strictly increasing".into()));
        }
        if c.l_pair.0 < 2 || c.l_pair.0 >= c.l_pair.1 {
            return Err(Error::Config(format!("critical_line.l_pair: need 2 <= L_small < L_large, got {:?}", c.l_pair)));
        }
        let (a, b) = self.crossing.t_range;
        if !(a > 0.0 && b > a) {
            return Err(Error::Config(format!("crossing.t_range: need 0 < T_min < T_max, got ({a}, {b})")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE: &str = r#"
[run]
l = 3
engine = "ed"

[equilibrium]
h = [2.0]
t = [1.0]
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = RunConfig::from_toml_str(EXAMPLE, &[]).unwrap();
        assert_eq!(cfg.run.l, 3);
        assert_eq!(cfg.run.engine, Engine::Ed);
        cfg.validate(Command::Equilibrium).unwrap();
        assert!(matches!(cfg.validate(Command::TfCurve), Err(Error::Config(_))));
    }

    #[test]
    fn negative_temperature_names_the_field() {
        let cfg = RunConfig::from_toml_str(EXAMPLE, &["equilibrium.t=[-1.0]".into()]).unwrap();
        match cfg.validate(Command::Equilibrium) {
            Err(Error::Config(msg)) => assert!(msg.contains("equilibrium.t"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let err = RunConfig::from_toml_str("[run]\nsize = 4\n", &[]).unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("size"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_create_sections_and_accept_bare_words() {
        let cfg = RunConfig::from_toml_str(
            EXAMPLE,
            &["run.engine=qmc".into(), "tf_curve.h_i=0".into(), "tf_curve.t_i=0.25".into(), "tf_curve.h_f=[1, 2]".into()],
        );
        let cfg = cfg.unwrap();
        assert_eq!(cfg.run.engine, Engine::Qmc);
        assert_eq!(cfg.tf_curve.unwrap().h_f, vec![1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn toml_round_trip_is_lossless(
            l in 2usize..40,
            seed in 0u64..=i64::MAX as u64,
            j in 0.01f64..10.0,
            hs in proptest::collection::vec(0.0f64..5.0, 1..6),
            t_i in proptest::option::of(0.01f64..5.0),
            delta in 0.0f64..0.5,
        ) {
            let cfg = RunConfig {
                run: RunSection { l, j, seed, output_dir: Some("out dir/x".into()), ..Default::default() },
                solver: SolveOptions { extra_delta: delta, bracket: Some((0.1, 3.0)), ..Default::default() },
                tf_curve: Some(TfCurveSection { h_i: hs[0], t_i, h_f: hs.clone() }),
                fss: Some(FssSection { input: None, points: vec![(8.0, 1.7, 1e-3)] }),
                ..Default::default()
            };
            let text = cfg.to_toml_string().unwrap();
            let back = RunConfig::from_toml_str(&text, &[]).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
