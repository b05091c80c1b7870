use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use critdrift::drift::{BoundedPart, DriftSpec};
use critdrift::experiment::{run, ExampleDrift, ExperimentConfig, ExperimentKind, SimCase, SimulateParams};
use critdrift::manifest::Manifest;
use critdrift::plots::emit_plots;
use critdrift::Error;

#[derive(Parser)]
#[command(name = "critdrift", version, about = "Experiments for SDEs with critical singular drifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: ./out/<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Advisory checks fail the run too.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    /// Drift preset: zero, constant, linear, example_1_8, example_1_8_bump.
    #[arg(long)]
    drift: Option<String>,
    /// Parameter of the preset (constant value, rate, or amplitude).
    #[arg(long)]
    drift_param: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    n_steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    PdeSolve(Common),
    KrylovCheck(Common),
    Simulate(SimArgs),
    ZvonkinCompare(Common),
    MollifyDemo(Common),
    Counterexample(Common),
    FellerProbe(Common),
    Density(Common),
    /// Rewrite plot scripts for an existing manifest.
    Plots {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn preset(name: &str, param: Option<f64>) -> Result<(DriftSpec, f64), Error> {
    let e = critdrift::ExponentPair::new(2.0, 4.0, 1, 0.5)?;
    Ok(match name {
        "zero" => (DriftSpec::zero(), 1.0),
        "constant" => (
            DriftSpec::zero().with_bounded(BoundedPart::Constant { c: param.unwrap_or(0.5) }),
            1.0,
        ),
        "linear" => (
            DriftSpec::zero().with_bounded(BoundedPart::Linear { rate: param.unwrap_or(1.0) }),
            1.0,
        ),
        "example_1_8" | "example_1_8_bump" => {
            let d = ExampleDrift {
                amplitude: param.unwrap_or(0.2),
                bump: if name.ends_with("bump") { 0.3 } else { 0.0 },
                ..ExampleDrift::default()
            };
            (d.build(&e)?, d.horizon)
        }
        other => return Err(Error::Config(format!("unknown drift preset {other}"))),
    })
}

fn load(kind: ExperimentKind, c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::new(kind),
    };
    if cfg.experiment != kind {
        return Err(Error::Config(format!(
            "config is for {} but the subcommand is {}",
            cfg.experiment.name(),
            kind.name()
        )));
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.workers.is_some() {
        cfg.workers = c.workers;
    }
    cfg.strict |= c.strict;
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(kind: ExperimentKind, cfg: ExperimentConfig) -> ExitCode {
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    match run(&cfg, &out) {
        Ok(m) => report(&m, &out),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Json(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn report(m: &Manifest, out: &std::path::Path) -> ExitCode {
    for c in &m.checks {
        let tag = if c.pass {
            "ok  "
        } else if c.advisory && !m.strict {
            "warn"
        } else {
            "FAIL"
        };
        println!("{tag} {:<40} value {:<14.6e} threshold {:.6e}", c.name, c.value, c.threshold);
    }
    for d in &m.diagnostics {
        eprintln!("diagnostic: {d}");
    }
    println!("manifest: {}", out.join(critdrift::manifest::MANIFEST_NAME).display());
    if m.passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed checks: {}", m.failed.join(", "));
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::PdeSolve(c) => (ExperimentKind::PdeSolve, c.clone()),
        Command::KrylovCheck(c) => (ExperimentKind::KrylovCheck, c.clone()),
        Command::Simulate(s) => (ExperimentKind::Simulate, s.common.clone()),
        Command::ZvonkinCompare(c) => (ExperimentKind::ZvonkinCompare, c.clone()),
        Command::MollifyDemo(c) => (ExperimentKind::MollifyDemo, c.clone()),
        Command::Counterexample(c) => (ExperimentKind::Counterexample, c.clone()),
        Command::FellerProbe(c) => (ExperimentKind::FellerProbe, c.clone()),
        Command::Density(c) => (ExperimentKind::Density, c.clone()),
        Command::Plots { manifest } => {
            let dir = manifest.parent().map(PathBuf::from).unwrap_or_default();
            return match Manifest::read(manifest).and_then(|m| emit_plots(&m, &dir)) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let mut cfg = match load(kind, &common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Command::Simulate(s) = &cli.command {
        let mut p = cfg.simulate.clone().unwrap_or_default();
        if let Some(name) = &s.drift {
            match preset(name, s.drift_param) {
                Ok((drift, horizon)) => {
                    p.cases = vec![SimCase {
                        name: name.clone(),
                        drift,
                        x0: s.x0.unwrap_or(0.0),
                        horizon,
                    }]
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        p.n_paths = s.n_paths.unwrap_or(p.n_paths);
        p.n_steps = s.n_steps.unwrap_or(p.n_steps);
        cfg.simulate = Some(SimulateParams { ..p });
        if let Err(e) = cfg.validate() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    execute(kind, cfg)
}
