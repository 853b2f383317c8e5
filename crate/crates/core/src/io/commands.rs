//! The pipeline behind each CLI subcommand: run, write data files atomically,
//! then write a manifest with their digests.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Command, Engine, RunConfig};
use super::manifest::{OutputDigest, RunManifest, SeedRecord, MANIFEST_FILE};
use super::{observable_by_name, sha256_hex, write_atomic, SCHEMA_VERSION};
use crate::dynamics::{time_grid, QuenchDynamics, TfSource};
use crate::ed::{EdLimits, ObservableKind};
use crate::error::{Error, Result};
use crate::lattice::{InitialState, QuenchSpec};
use crate::phase::{self, build_critical_line, fss_fit, write_line_csv, CriticalLine, FssPoint};
use crate::qmc::{stats::binder, Observable, Precision, QmcRunner};
use crate::quench::{fmt, tf_curve, EdEvaluator, EnergyEvaluator, QmcEvaluator, TfCurve};

/// What a command produced.
#[derive(Debug)]
pub struct CommandReport {
    pub manifest: RunManifest,
    pub output_dir: PathBuf,
    /// One line per notable result, for the terminal.
    pub summary: Vec<String>,
    /// Nothing usable came out (every grid point failed).
    pub total_failure: bool,
}

#[derive(Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Versioned<'a, T> {
            schema_version: u32,
            #[serde(flatten)]
            body: &'a T,
        }
        let mut bytes = serde_json::to_vec_pretty(&Versioned {
            schema_version: SCHEMA_VERSION,
            body: value,
        })?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    cache_dir: Option<&'a Path>,
    runner: Arc<QmcRunner>,
}

impl Context<'_> {
    fn ed(&self) -> Result<EdEvaluator> {
        let ev = EdEvaluator::new(self.cfg.run.l, self.cfg.run.j, &EdLimits::default())?;
        Ok(match self.cache_dir {
            Some(d) => ev.with_cache_dir(d),
            None => ev,
        })
    }

    fn evaluator(&self) -> Result<Box<dyn EnergyEvaluator>> {
        Ok(match self.cfg.run.engine {
            Engine::Ed => Box::new(self.ed()?),
            Engine::Qmc => Box::new(QmcEvaluator::new(Arc::clone(&self.runner), self.cfg.run.l)),
        })
    }
}

/// Runs `command` and writes its files plus `manifest.json` into `output_dir`.
/// `cache_dir = None` disables on-disk caching.
pub fn run_command(command: Command, cfg: &RunConfig, output_dir: &Path, cache_dir: Option<&Path>) -> Result<CommandReport> {
    cfg.validate(command)?;
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut runner = QmcRunner::new(cfg.sweep_settings());
    if let Some(d) = cache_dir {
        runner = runner.with_cache_dir(d);
    }
    let ctx = Context {
        cfg,
        cache_dir,
        runner: Arc::new(runner),
    };
    let mut out = Outputs::default();
    let mut summary = Vec::new();
    let total_failure = match command {
        Command::Equilibrium => equilibrium(&ctx, &mut out, &mut summary)?,
        Command::TfCurve => tf_curve_cmd(&ctx, &mut out, &mut summary)?,
        Command::CriticalLine => critical_line_cmd(&ctx, &mut out, &mut summary)?,
        Command::PhaseDiagram => phase_diagram_cmd(&ctx, &mut out, &mut summary)?,
        Command::Fss => fss_cmd(&ctx, &mut out, &mut summary)?,
        Command::Dynamics => dynamics_cmd(&ctx, &mut out, &mut summary)?,
    };

    std::fs::create_dir_all(output_dir)?;
    let mut echo = cfg.clone();
    echo.run.output_dir = Some(output_dir.to_path_buf());
    echo.run.cache_dir = cache_dir.map(Path::to_path_buf);
    let mut manifest = RunManifest::new(command, echo);
    for (name, bytes) in &out.files {
        write_atomic(&output_dir.join(name), bytes)?;
        manifest.outputs.push(OutputDigest {
            file: name.clone(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }
    manifest.seeds = ctx.runner.served().iter().map(|(p, c)| SeedRecord::new(*p, c)).collect();
    manifest.started_unix_s = started_unix_s;
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    write_atomic(&output_dir.join(MANIFEST_FILE), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(CommandReport {
        manifest,
        output_dir: output_dir.to_path_buf(),
        summary,
        total_failure,
    })
}

/// Re-runs a manifest into `output_dir`; returns the report and the files whose
/// digests differ from the recorded ones.
pub fn replay(manifest: &RunManifest, output_dir: &Path, cache_dir: Option<&Path>) -> Result<(CommandReport, Vec<String>)> {
    let report = run_command(manifest.command, &manifest.config, output_dir, cache_dir)?;
    let mismatched = manifest.mismatches(output_dir);
    Ok((report, mismatched))
}

fn equilibrium(ctx: &Context, out: &mut Outputs, summary: &mut Vec<String>) -> Result<bool> {
    let sec = ctx.cfg.equilibrium.as_ref().expect("validated");
    let l = ctx.cfg.run.l;
    let pairs: Vec<(f64, f64)> = sec.h.iter().flat_map(|&h| sec.t.iter().map(move |&t| (h, t))).collect();
    // (mean, stderr) per observable in `Observable::ALL` order
    let rows: Vec<Vec<(f64, f64)>> = match ctx.cfg.run.engine {
        Engine::Qmc => pairs
            .par_iter()
            .map(|&(h, t)| {
                let est = ctx.runner.run(l, h, t, Precision::Full)?;
                Ok(Observable::ALL.iter().map(|&o| (est.get(o).mean, est.get(o).stderr)).collect())
            })
            .collect::<Result<_>>()?,
        Engine::Ed => {
            let ed = ctx.ed()?;
            pairs
                .iter()
                .map(|&(h, t)| {
                    let table = ed.table(h)?;
                    let get = |k| table.thermal(t, k);
                    let (m2, m4) = (get(ObservableKind::M2)?, get(ObservableKind::M4)?);
                    Ok(vec![
                        (get(ObservableKind::TotalEnergy)?, 0.0),
                        (get(ObservableKind::ZzBondSum)?, 0.0),
                        (get(ObservableKind::XSum)?, 0.0),
                        (m2, 0.0),
                        (m4, 0.0),
                        (binder(m2, m4), 0.0),
                        (get(ObservableKind::Cnn)?, 0.0),
                    ])
                })
                .collect::<Result<_>>()?
        }
    };
    let engine = match ctx.cfg.run.engine {
        Engine::Qmc => "qmc",
        Engine::Ed => "ed",
    };
    out.csv("equilibrium.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec!["schema_version".to_string(), "engine".into(), "L".into(), "J".into(), "h".into(), "T".into()];
        for o in Observable::ALL {
            header.push(o.name().into());
            header.push(format!("{}_err", o.name()));
        }
        w.write_record(&header)?;
        for (&(h, t), row) in pairs.iter().zip(&rows) {
            let mut rec = vec![SCHEMA_VERSION.to_string(), engine.into(), l.to_string(), fmt(ctx.cfg.run.j), fmt(h), fmt(t)];
            for &(m, e) in row {
                rec.push(fmt(m));
                rec.push(fmt(e));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Point {
        h: f64,
        t: f64,
        values: std::collections::BTreeMap<&'static str, (f64, f64)>,
    }
    let points: Vec<Point> = pairs
        .iter()
        .zip(&rows)
        .map(|(&(h, t), row)| Point {
            h,
            t,
            values: Observable::ALL.iter().map(|o| o.name()).zip(row.iter().copied()).collect(),
        })
        .collect();
    out.json("equilibrium.json", &serde_json::json!({ "engine": engine, "l": l, "points": points }))?;
    summary.push(format!("{} (h, T) points with engine {engine}", pairs.len()));
    Ok(false)
}

fn initial_state(t_i: Option<f64>) -> InitialState {
    match t_i {
        Some(t) => InitialState::Thermal { t },
        None => InitialState::GroundState,
    }
}

fn tf_curve_cmd(ctx: &Context, out: &mut Outputs, summary: &mut Vec<String>) -> Result<bool> {
    let sec = ctx.cfg.tf_curve.as_ref().expect("validated");
    let ev = ctx.evaluator()?;
    let initial = ev.initial(sec.h_i, initial_state(sec.t_i))?;
    let curve = tf_curve(&initial, &sec.h_f, ev.as_ref(), &ctx.cfg.solver)?;
    out.csv("tf_curve.csv", |buf| curve.write_csv(buf))?;
    out.json("tf_curve.json", &curve)?;
    let solved = curve.solved().count();
    summary.push(format!("{solved}/{} h_f points solved", curve.points.len()));
    for p in &curve.points {
        match &p.result {
            Some(r) => summary.push(format!(
                "h_f = {:.4}: T_f = {:.5} [{:.5}, {:.5}]{}{}",
                p.h_f,
                r.t_f,
                r.t_lo,
                r.t_hi,
                if r.cooling { " cooling" } else { "" },
                if r.identity { " identity" } else { "" }
            )),
            None => summary.push(format!("h_f = {:.4}: {}", p.h_f, p.error.as_deref().unwrap_or("failed"))),
        }
    }
    Ok(solved == 0)
}

fn build_line(ctx: &Context) -> Result<CriticalLine> {
    let sec = ctx.cfg.critical_line.as_ref().expect("validated");
    build_critical_line(&ctx.runner, &sec.h, sec.l_pair, &ctx.cfg.crossing)
}

fn critical_line_cmd(ctx: &Context, out: &mut Outputs, summary: &mut Vec<String>) -> Result<bool> {
    let line = build_line(ctx)?;
    out.csv("critical_line.csv", |buf| write_line_csv(&line, buf))?;
    out.json("critical_line.json", &line)?;
    for k in 0..line.h.len() {
        summary.push(format!("h = {:.4}: T_c = {:.5} +- {:.5}", line.h[k], line.t_c[k], line.sigma[k]));
    }
    Ok(false)
}

/// Reads a line JSON as written by `critical-line` (extra keys are ignored).
pub fn load_line(path: &Path) -> Result<CriticalLine> {
    let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn phase_diagram_cmd(ctx: &Context, out: &mut Outputs, summary: &mut Vec<String>) -> Result<bool> {
    let sec = ctx.cfg.phase_diagram.as_ref().expect("validated");
    let line = match &sec.critical_line {
        Some(p) => load_line(p)?,
        None => build_line(ctx)?,
    };
    let ev = ctx.evaluator()?;
    let diagram = phase::phase_diagram(sec.h_i, &sec.t_i, &sec.h_f, ev.as_ref(), &line, &ctx.cfg.solver)?;
    out.csv("phase_cells.csv", |buf| diagram.write_cells_csv(buf))?;
    out.csv("phase_boundary.csv", |buf| diagram.write_boundary_csv(buf))?;
    out.csv("critical_line.csv", |buf| write_line_csv(&line, buf))?;
    out.json("phase_diagram.json", &diagram)?;
    let mut classified = 0;
    for row in &diagram.rows {
        let pts: Vec<String> = row
            .critical_points
            .iter()
            .map(|p| format!("{:.4} [{:.4}, {:.4}]", p.h_c, p.h_lo, p.h_hi))
            .collect();
        classified += row.cells.iter().filter(|c| c.phase.is_some()).count();
        summary.push(format!("T_i = {:.4}: h_c^d = {}", row.t_i, if pts.is_empty() { "none".into() } else { pts.join(", ") }));
    }
    if !diagram.nesting_violations.is_empty() {
        summary.push(format!("{} nesting violations recorded", diagram.nesting_violations.len()));
    }
    Ok(classified == 0)
}

fn read_fss_csv(path: &Path) -> Result<Vec<FssPoint>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let (cl, ct, cs) = (col("L")?, col("T_f")?, col("sigma")?);
    let mut pts = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Config(format!("{}: row {}: bad number", path.display(), k + 2)))
        };
        pts.push(FssPoint {
            l: num(cl)?,
            t_f: num(ct)?,
            sigma: num(cs)?,
        });
    }
    Ok(pts)
}

fn fss_cmd(ctx: &Context, out: &mut Outputs, summary: &mut Vec<String>) -> Result<bool> {
    let sec = ctx.cfg.fss.as_ref().expect("validated");
    let mut pts = match &sec.input {
        Some(p) => read_fss_csv(p)?,
        None => Vec::new(),
    };
    pts.extend(sec.points.iter().map(|&p| FssPoint::from(p)));
    let fit = fss_fit(&pts)?;
    out.csv("fss.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "schema_version", "a", "b", "c", "sigma_a", "sigma_b", "sigma_c", "rmse", "residual_std", "chi2", "n_points", "degenerate",
        ])?;
        w.write_record([
            SCHEMA_VERSION.to_string(),
            fmt(fit.a),
            fmt(fit.b),
            fmt(fit.c),
            fmt(fit.sigma_a()),
            fmt(fit.sigma_b()),
            fmt(fit.sigma_c()),
            fmt(fit.rmse),
            fmt(fit.residual_std),
            fmt(fit.chi2),
            fit.n_points.to_string(),
            (fit.degenerate as u8).to_string(),
        ])?;
        w.flush()?;
        Ok(())
    })?;
    out.json("fss.json", &serde_json::json!({ "points": pts, "fit": fit }))?;
    summary.push(format!(
        "T_f(L) = {:.5} L^-{:.4} + {:.5}  (sigma_c {:.2e}, rmse {:.2e})",
        fit.a,
        fit.b,
        fit.c,
        fit.sigma_c(),
        fit.rmse
    ));
    Ok(false)
}

fn dynamics_cmd(ctx: &Context, out: &mut Outputs, summary: &mut Vec<String>) -> Result<bool> {
    let sec = ctx.cfg.dynamics.as_ref().expect("validated");
    let quench = QuenchSpec {
        h_i: sec.h_i,
        initial: initial_state(sec.t_i),
        h_f: sec.h_f,
    };
    let dynamics = QuenchDynamics::new(ctx.cfg.run.l, ctx.cfg.run.j, quench, &EdLimits::default())?;
    let source = match &sec.tf_source {
        None => TfSource::EdExact,
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let curve: TfCurve = serde_json::from_slice(&bytes)?;
            let result = curve
                .points
                .into_iter()
                .find(|p| p.h_f == sec.h_f)
                .and_then(|p| p.result)
                .ok_or_else(|| Error::invalid(format!("{} has no solved point at h_f = {}", path.display(), sec.h_f)))?;
            TfSource::Imported { result: Box::new(result) }
        }
    };
    let times = time_grid(sec.t_max, sec.n_times);
    let tail_from = sec.tail_from.unwrap_or(0.5 * sec.t_max);
    let mut series_meta = Vec::new();
    for name in &sec.observables {
        let obs = observable_by_name(name)?;
        let series = dynamics.evolve(obs, &times)?;
        let prediction = dynamics.steady_state_prediction(obs, source.clone())?;
        let tail = dynamics.compare_tail(&series, tail_from, &prediction)?;
        out.csv(&format!("dynamics_{name}.csv"), |buf| series.write_csv(buf))?;
        summary.push(format!(
            "{name}: tail mean {:.6} +- {:.6}, diagonal ensemble {:.6}, thermal prediction {:.6} at T_f = {:.5}",
            tail.tail_mean, tail.tail_std, tail.diagonal_ensemble, tail.prediction, prediction.t_f
        ));
        series_meta.push(serde_json::json!({
            "observable": name,
            "file": format!("dynamics_{name}.csv"),
            "max_imag": series.max_imag,
            "prediction": prediction,
            "tail": tail,
        }));
    }
    out.json(
        "dynamics.json",
        &serde_json::json!({
            "l": ctx.cfg.run.l,
            "j": ctx.cfg.run.j,
            "quench": quench,
            "quench_energy": dynamics.quench_energy()?,
            "series": series_meta,
        }),
    )?;
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::from_toml_str(text, &[]).unwrap()
    }

    #[test]
    fn ed_equilibrium_row_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("[run]\nl = 3\nengine = \"ed\"\n[equilibrium]\nh = [2.0]\nt = [1.0]\n");
        let rep = run_command(Command::Equilibrium, &c, dir.path(), None).unwrap();
        let text = std::fs::read_to_string(dir.path().join("equilibrium.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("schema_version,engine,L,J,h,T,total_energy,total_energy_err"));
        let energy: f64 = lines[1].split(',').nth(6).unwrap().parse().unwrap();
        assert!((energy + 22.542).abs() < 1e-3, "{energy}");
        assert_eq!(rep.manifest.outputs.len(), 2);
        assert!(rep.manifest.mismatches(dir.path()).is_empty());
    }

    #[test]
    fn tf_curve_flags_identity_row() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("[run]\nl = 3\nengine = \"ed\"\n[tf_curve]\nh_i = 1.0\nt_i = 1.0\nh_f = [0.5, 1.0, 2.0]\n");
        run_command(Command::TfCurve, &c, dir.path(), None).unwrap();
        let mut r = csv::Reader::from_path(dir.path().join("tf_curve.csv")).unwrap();
        let h = r.headers().unwrap().clone();
        let idx = |n: &str| h.iter().position(|x| x == n).unwrap();
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        let id = &rows[1];
        assert_eq!(&id[idx("identity_flag")], "1");
        let t_f: f64 = id[idx("T_f")].parse().unwrap();
        assert!((t_f - 1.0).abs() < 1e-6, "{t_f}");
        assert_eq!(&rows[0][idx("identity_flag")], "0");
    }

    #[test]
    fn fss_from_csv_file() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("fss_in.csv");
        let mut text = String::from("L,T_f,sigma\n");
        for l in [8.0f64, 12.0, 16.0, 20.0, 24.0, 32.0] {
            text.push_str(&format!("{l},{},0.001\n", 0.4 * l.powf(-1.2) + 1.7));
        }
        std::fs::write(&input, text).unwrap();
        let c = cfg(&format!("[fss]\ninput = {:?}\n", input.to_str().unwrap()));
        run_command(Command::Fss, &c, &dir.path().join("out"), None).unwrap();
        let out = std::fs::read_to_string(dir.path().join("out/fss.csv")).unwrap();
        let c_fit: f64 = out.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
        assert!((c_fit - 1.7).abs() < 1e-9);
    }

    #[test]
    fn dynamics_writes_series_and_prediction() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("[run]\nl = 3\n[dynamics]\nh_i = 2.0\nt_i = 1.0\nh_f = 3.0\nt_max = 10.0\nn_times = 11\n");
        let rep = run_command(Command::Dynamics, &c, dir.path(), None).unwrap();
        let names: Vec<&str> = rep.manifest.outputs.iter().map(|o| o.file.as_str()).collect();
        assert_eq!(names, ["dynamics_M2.csv", "dynamics_C_nn.csv", "dynamics.json"]);
        let text = std::fs::read_to_string(dir.path().join("dynamics_M2.csv")).unwrap();
        assert_eq!(text.lines().count(), 12);
    }
}
