//! henonlab: command-line front end for the complex Hénon map lab.

mod commands;
mod config;
mod error;
mod output;

use clap::{Args, Parser, Subcommand};
use commands::Context;
use config::{parse_assignment, worker_count, Effective, RunConfig};
use error::CliError;
use output::{envelope, error_report, pretty, stamp_csv, stamp_pgm, write_atomic, Extra};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "henonlab", version, about = "Complex Hénon map lab")]
struct Cli {
    #[command(subcommand)]
    group: Group,
}

#[derive(Subcommand)]
enum Group {
    /// Rasters of escape data and parameter scans.
    #[command(subcommand)]
    Render(RenderCmd),
    /// Periodic orbits: solve, enumerate, continue, multiplier roots.
    #[command(subcommand)]
    Orbits(OrbitsCmd),
    /// Stable and unstable manifold parametrizations.
    #[command(subcommand)]
    Manifold(ManifoldCmd),
    /// Basin critical points.
    #[command(subcommand)]
    Basin(BasinCmd),
    /// Parabolic implosion: normal form and transit orbits.
    #[command(subcommand)]
    Implosion(ImplosionCmd),
    /// Tangency certification.
    #[command(subcommand)]
    Tangency(TangencyCmd),
}

#[derive(Subcommand)]
enum RenderCmd {
    Julia(RunArgs),
    Bifurcation(RunArgs),
}

#[derive(Subcommand)]
enum OrbitsCmd {
    Find(RunArgs),
    Enumerate(RunArgs),
    Continue(RunArgs),
    Unity(RunArgs),
}

#[derive(Subcommand)]
enum ManifoldCmd {
    Series(RunArgs),
    Order(RunArgs),
    Wiman(RunArgs),
}

#[derive(Subcommand)]
enum BasinCmd {
    Critical(RunArgs),
}

#[derive(Subcommand)]
enum ImplosionCmd {
    NormalForm(RunArgs),
    Transit1d(RunArgs),
    Transit2d(RunArgs),
}

#[derive(Subcommand)]
enum TangencyCmd {
    Hunt(RunArgs),
    Homoclinic(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; without it the JSON result goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: HENONLAB_WORKERS, then all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Integer RNG seed, or a start point "a,b" for orbit commands.
    #[arg(long)]
    seed: Option<String>,
    /// Family spec JSON file.
    #[arg(long)]
    family: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long)]
    period: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    /// Extra parameter KEY=JSON; repeatable.
    #[arg(long = "param", value_name = "KEY=JSON", allow_hyphen_values = true)]
    params: Vec<String>,
}

impl Group {
    fn split(self) -> (&'static str, RunArgs) {
        match self {
            Group::Render(RenderCmd::Julia(a)) => ("render julia", a),
            Group::Render(RenderCmd::Bifurcation(a)) => ("render bifurcation", a),
            Group::Orbits(OrbitsCmd::Find(a)) => ("orbits find", a),
            Group::Orbits(OrbitsCmd::Enumerate(a)) => ("orbits enumerate", a),
            Group::Orbits(OrbitsCmd::Continue(a)) => ("orbits continue", a),
            Group::Orbits(OrbitsCmd::Unity(a)) => ("orbits unity", a),
            Group::Manifold(ManifoldCmd::Series(a)) => ("manifold series", a),
            Group::Manifold(ManifoldCmd::Order(a)) => ("manifold order", a),
            Group::Manifold(ManifoldCmd::Wiman(a)) => ("manifold wiman", a),
            Group::Basin(BasinCmd::Critical(a)) => ("basin critical", a),
            Group::Implosion(ImplosionCmd::NormalForm(a)) => ("implosion normal-form", a),
            Group::Implosion(ImplosionCmd::Transit1d(a)) => ("implosion transit1d", a),
            Group::Implosion(ImplosionCmd::Transit2d(a)) => ("implosion transit2d", a),
            Group::Tangency(TangencyCmd::Hunt(a)) => ("tangency hunt", a),
            Group::Tangency(TangencyCmd::Homoclinic(a)) => ("tangency homoclinic", a),
        }
    }
}

/// Number or JSON literal for a flag value.
fn flag_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

fn merge(command: &str, args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &cfg.command {
        if c != command {
            return Err(CliError::new("config", format!("config is for '{c}', not '{command}'")));
        }
    }
    if let Some(p) = &args.family {
        cfg.family = Some(config::FamilyRef::Path(p.display().to_string()));
    }
    if let Some(t) = args.tol {
        cfg.tol = Some(t);
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if let Some(s) = &args.seed {
        match s.trim().parse::<u64>() {
            Ok(n) => cfg.seed = Some(n),
            Err(_) => {
                let parts: Vec<&str> = s.split(',').collect();
                let nums: Vec<f64> = parts.iter().filter_map(|p| p.trim().parse().ok()).collect();
                if parts.len() != 2 || nums.len() != 2 {
                    return Err(CliError::new("usage", format!("--seed takes an integer or a start point 'a,b', got '{s}'")));
                }
                cfg.set_param("start", json!([nums[0], nums[1]]));
            }
        }
    }
    if let Some(l) = &args.lambda {
        cfg.set_param("lambda", flag_value(l));
    }
    if let Some(p) = args.period {
        cfg.set_param("period", json!(p));
    }
    if let Some(n) = args.n {
        cfg.set_param("n", json!(n));
    }
    if let Some(o) = args.order {
        cfg.set_param("order", json!(o));
    }
    for a in &args.params {
        let (k, v) = parse_assignment(a)?;
        cfg.set_param(&k, v);
    }
    Ok(cfg)
}

struct Run {
    hash: Option<String>,
}

fn execute(command: &str, args: &RunArgs, run: &mut Run) -> Result<(), CliError> {
    let cfg = merge(command, args)?;
    let ctx = Context { family: cfg.resolve_family()?, seed: cfg.seed.unwrap_or(0), tol: cfg.tol, params: cfg.params.clone() };
    let workers = worker_count(cfg.workers)?;
    if workers == Some(0) {
        return Err(CliError::new("config", "workers must be positive"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::from("config", e))?;
    let outcome = pool.install(|| commands::run(command, &ctx))?;

    let eff = Effective { command: command.to_string(), family: outcome.family, seed: ctx.seed, tol: ctx.tol, params: outcome.params };
    let hash = eff.sha256();
    run.hash = Some(hash.clone());
    let doc = pretty(&envelope(&eff, &hash, outcome.artifacts.result));

    match &args.out {
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&doc).map_err(|e| CliError::from("io", e))?;
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::new("io", format!("{}: {e}", dir.display())))?;
            let stem = command.replace(' ', "-");
            for extra in &outcome.artifacts.extras {
                match extra {
                    Extra::Csv(name, body) => write_atomic(&dir.join(name), &stamp_csv(body, &hash))?,
                    Extra::Pgm(name, bytes) => write_atomic(&dir.join(name), &stamp_pgm(bytes, &hash))?,
                }
            }
            write_atomic(&dir.join(format!("{stem}.json")), &doc)?;
            let stale = dir.join("error.json");
            if stale.exists() {
                std::fs::remove_file(&stale).map_err(|e| CliError::new("io", format!("{}: {e}", stale.display())))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = cli.group.split();
    let mut run = Run { hash: None };
    match execute(command, &args, &mut run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let doc = pretty(&error_report(command, run.hash.as_deref(), &err));
            if let Some(dir) = &args.out {
                if std::fs::create_dir_all(dir).is_ok() {
                    let _ = write_atomic(&dir.join("error.json"), &doc);
                }
            }
            use std::io::Write;
            let _ = std::io::stderr().write_all(&doc);
            ExitCode::from(1)
        }
    }
}
