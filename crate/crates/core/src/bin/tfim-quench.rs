use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tfim_quench::error::{Error, Result};
use tfim_quench::io::cache::{self, VerifyStatus};
use tfim_quench::io::commands::{replay, run_command};
use tfim_quench::io::config::{Command, RunConfig, ENV_CACHE_DIR, ENV_OUTPUT_DIR};
use tfim_quench::io::manifest::RunManifest;

/// Post-quench temperatures and dynamical phase diagrams of the 2D transverse-field Ising model.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Output directory (default: $TFIM_QUENCH_OUTPUT_DIR, then run.output_dir, then tfim-output/<command>).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Cache directory (default: $TFIM_QUENCH_CACHE_DIR, then run.cache_dir, then .tfim-cache).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Do not read or write the on-disk cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Worker threads (overrides run.threads; 0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a manifest.json from an earlier run to regenerate it.
    input: PathBuf,
    /// Overrides of the form section.key=value.
    overrides: Vec<String>,
    /// With a manifest: fail unless every regenerated file matches its recorded digest.
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Equilibrium observables on an (h, T) grid.
    Equilibrium(RunArgs),
    /// Post-quench temperature T_f over a grid of final fields.
    TfCurve(RunArgs),
    /// Equilibrium critical line from Binder-cumulant crossings.
    CriticalLine(RunArgs),
    /// Dynamical phase diagram over (T_i, h_f).
    PhaseDiagram(RunArgs),
    /// Finite-size scaling fit T_f(L) = a L^-b + c.
    Fss(RunArgs),
    /// Exact real-time evolution and steady-state prediction.
    Dynamics(RunArgs),
    /// Inspect or clear the result cache.
    #[command(subcommand)]
    Cache(CacheCmd),
}

#[derive(Subcommand)]
enum CacheCmd {
    List,
    /// Recompute digests; exits 1 if any entry does not match.
    Verify,
    /// Remove every entry; safe to repeat.
    Purge,
}

fn env_path(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).map(PathBuf::from)
}

fn cache_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.cache_dir
        .clone()
        .or_else(|| env_path(ENV_CACHE_DIR))
        .or_else(|| cfg.and_then(|c| c.run.cache_dir.clone()))
        .unwrap_or_else(|| PathBuf::from(".tfim-cache"))
}

fn set_threads(n: usize) {
    if n > 0 {
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn is_manifest(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

fn run(cli: &Cli, command: Command, args: &RunArgs) -> Result<bool> {
    if is_manifest(&args.input) {
        if !args.overrides.is_empty() {
            return Err(Error::Config("overrides cannot be combined with a manifest".into()));
        }
        let manifest = RunManifest::load(&args.input)?;
        if manifest.command != command {
            return Err(Error::Config(format!(
                "{} records a `{}` run, not `{}`",
                args.input.display(),
                manifest.command.name(),
                command.name()
            )));
        }
        let cfg = &manifest.config;
        set_threads(cli.threads.unwrap_or(cfg.run.threads));
        let out = cli
            .output_dir
            .clone()
            .or_else(|| env_path(ENV_OUTPUT_DIR))
            .or_else(|| cfg.run.output_dir.clone())
            .unwrap_or_else(|| cfg.output_dir(command));
        let cache = (!cli.no_cache).then(|| cache_dir(cli, Some(cfg)));
        let (report, mismatched) = replay(&manifest, &out, cache.as_deref())?;
        report_lines(&report.summary, &report.output_dir);
        if mismatched.is_empty() {
            println!("replay matches all {} recorded digests", manifest.outputs.len());
        } else {
            for f in &mismatched {
                eprintln!("digest mismatch: {f}");
            }
            if args.check {
                return Ok(false);
            }
        }
        return Ok(!report.total_failure);
    }

    let cfg = RunConfig::load(&args.input, &args.overrides)?;
    set_threads(cli.threads.unwrap_or(cfg.run.threads));
    let out = cli.output_dir.clone().unwrap_or_else(|| cfg.output_dir(command));
    let cache = (!cli.no_cache).then(|| cache_dir(cli, Some(&cfg)));
    let report = run_command(command, &cfg, &out, cache.as_deref())?;
    report_lines(&report.summary, &report.output_dir);
    Ok(!report.total_failure)
}

fn report_lines(lines: &[String], dir: &Path) {
    for l in lines {
        println!("{l}");
    }
    println!("outputs in {}", dir.display());
}

fn cache_cmd(cli: &Cli, cmd: &CacheCmd) -> Result<bool> {
    let dir = cache_dir(cli, None);
    match cmd {
        CacheCmd::List => {
            let items = cache::list(&dir)?;
            for it in &items {
                println!("{:>12}  {}", it.bytes, it.name);
            }
            println!("{} entries in {}", items.len(), dir.display());
            Ok(true)
        }
        CacheCmd::Verify => {
            let results = cache::verify(&dir)?;
            let mut ok = true;
            for (name, status) in &results {
                match status {
                    VerifyStatus::Ok => {}
                    VerifyStatus::Mismatch { expected, actual } => {
                        ok = false;
                        println!("MISMATCH {name}: expected {expected}, found {actual}");
                    }
                    VerifyStatus::MissingDigest => {
                        ok = false;
                        println!("NO DIGEST {name}");
                    }
                }
            }
            println!("{} entries checked in {}", results.len(), dir.display());
            Ok(ok)
        }
        CacheCmd::Purge => {
            let n = cache::purge(&dir)?;
            println!("removed {n} entries from {}", dir.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Sub::Equilibrium(a) => run(&cli, Command::Equilibrium, a),
        Sub::TfCurve(a) => run(&cli, Command::TfCurve, a),
        Sub::CriticalLine(a) => run(&cli, Command::CriticalLine, a),
        Sub::PhaseDiagram(a) => run(&cli, Command::PhaseDiagram, a),
        Sub::Fss(a) => run(&cli, Command::Fss, a),
        Sub::Dynamics(a) => run(&cli, Command::Dynamics, a),
        Sub::Cache(c) => cache_cmd(&cli, c),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
