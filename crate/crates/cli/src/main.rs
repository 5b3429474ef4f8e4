//! `bumpy`: batch runner for orbit analysis, normal forms, controllability
//! and perturbation design. Exit status 0 success, 1 numerical failure,
//! 2 hypothesis violation, 3 configuration or usage error.

mod config;
mod model;
mod output;
mod tasks;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use config::{Config, Task};
use output::Output;

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Numerical(String),
    Hypothesis(String),
    Config(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Numerical(_) => 1,
            Failure::Hypothesis(_) => 2,
            Failure::Config(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Hypothesis(m) => write!(f, "hypothesis violation: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

impl From<bumpy_core::Error> for Failure {
    fn from(e: bumpy_core::Error) -> Self {
        use bumpy_core::Error as E;
        match e {
            E::HypothesisViolation { .. } | E::Uncontrollable { .. } => Failure::Hypothesis(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bumpy", version, about = "Orbit analysis, normal forms and potential perturbations")]
struct Cli {
    /// Run configuration (TOML subset, see docs/cli.md).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Task to run; overrides [run] task.
    #[arg(long, value_name = "NAME", value_parser = parse_task)]
    task: Option<Task>,
    /// Output directory; overrides [run] out.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed; overrides [run] seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Factor applied to every tolerance in [tolerances].
    #[arg(long, value_name = "X", default_value_t = 1.0)]
    tol_scale: f64,
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse()
}

const DEFAULT_OUT: &str = "bumpy-out";

fn run(cli: Cli) -> u8 {
    let (src, config_name) = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(s) => (s, path.display().to_string()),
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", path.display());
                return 3;
            }
        },
        None => (String::new(), "none".to_string()),
    };
    let cfg = match Config::parse(&src) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    let Some(task) = cli.task.or(cfg.task) else {
        eprintln!("error: no task; set [run] task or pass --task");
        return 3;
    };
    if !(cli.tol_scale > 0.0 && cli.tol_scale.is_finite()) {
        eprintln!("error: --tol-scale must be positive, got {}", cli.tol_scale);
        return 3;
    }
    let seed = cli.seed.or(cfg.seed);
    let dir = cli.out.clone().or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let tol = cfg.tolerances.scaled(cli.tol_scale);

    let mut out = Output::new(true);
    out.line("bumpy report");
    out.line(format!("task = {}", task.as_str()));
    out.line(format!("seed = {}", seed.map_or("none".to_string(), |s| s.to_string())));
    out.line(format!("tol_scale = {:e}", cli.tol_scale));
    out.manifest("bumpy-cli version", env!("CARGO_PKG_VERSION"));
    out.manifest("bumpy-core version", bumpy_core::VERSION);
    out.manifest("config", &config_name);
    out.manifest("task", task.as_str());
    out.manifest("seed", seed.map_or("none".to_string(), |s| s.to_string()));
    out.manifest("tol_scale", format!("{:e}", cli.tol_scale));
    for (k, v) in tol.entries() {
        out.manifest(&format!("tolerance {k}"), format!("{v:e}"));
    }

    let result = tasks::run(
        task,
        &mut tasks::Ctx {
            cfg: &cfg,
            tol,
            seed,
            out: &mut out,
        },
    );
    let code = match &result {
        Ok(()) => {
            out.line("result = success (exit 0)");
            0
        }
        Err(f) => {
            eprintln!("error: {f}");
            out.line(format!("result = {f} (exit {})", f.code()));
            f.code()
        }
    };
    out.manifest("exit status", code);
    if let Err(e) = out.write(&dir) {
        eprintln!("error: cannot write outputs to {}: {e}", dir.display());
        return 1;
    }
    code
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(cli))
}
