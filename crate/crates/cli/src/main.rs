use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cgq_core::experiment::{self, ExperimentConfig, TRAJECTORY_FILE};
use cgq_core::Error;
use clap::{Args, Parser, Subcommand};

/// Continuous Galerkin solves with dual-weighted error estimates.
#[derive(Parser)]
#[command(name = "cgq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and store the trajectory (resumes an interrupted run).
    Solve(Common),
    /// Residuals, duals, stability factors and error bounds for a stored trajectory.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Trajectory file; defaults to <out>/trajectory.txt.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Final-time error over the (q, digits, dt) grid against a shared reference.
    Sweep(Common),
    /// Monte-Carlo round-off model against dt.
    Mc(Common),
    /// Print the resolved config and its hash.
    Config(Common),
}

#[derive(Args)]
struct Common {
    /// Config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `lorenz`, `vanderpol` or `linear:<path>`.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    /// Final time.
    #[arg(long = "T")]
    end: Option<String>,
    /// Method degree(s), comma separated.
    #[arg(long)]
    q: Option<String>,
    /// Time step(s), comma separated.
    #[arg(long)]
    dt: Option<String>,
    /// Decimal digits of working precision, comma separated.
    #[arg(long)]
    digits: Option<String>,
    /// Testing degree.
    #[arg(long)]
    p: Option<String>,
    /// Nonlinear solver tolerance.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// `auto`, `f64` or `mpfr`.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Allow runs estimated to exceed the long-running threshold.
    #[arg(long)]
    confirm_long: bool,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("problem", &self.problem),
            ("mu", &self.mu),
            ("T", &self.end),
            ("q", &self.q),
            ("dt", &self.dt),
            ("digits", &self.digits),
            ("p", &self.p),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("backend", &self.backend),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).with_context(|| format!("--{key}"))?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
            cfg.set(k.trim(), v.trim()).with_context(|| format!("--set {kv}"))?;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn hint(err: &anyhow::Error) -> Option<&'static str> {
    match err.downcast_ref::<Error>()? {
        Error::LongRunning { .. } => Some("rerun with --confirm-long, or shorten T / enlarge dt"),
        Error::NonConvergence { .. } => Some("halve --dt, or raise --digits if the tolerance is below the precision floor"),
        Error::Stale(_) => Some("run `cgq solve` with the same config first"),
        Error::Singular { .. } => Some("try a smaller --dt"),
        _ => None,
    }
}

fn run(cli: Cli) -> Result<()> {
    let json = match cli.command {
        Command::Solve(c) => serde_json::to_string_pretty(&experiment::cmd_solve(&c.resolve()?, c.confirm_long)?)?,
        Command::Estimate { common, trajectory } => {
            let cfg = common.resolve()?;
            let path = trajectory.unwrap_or_else(|| cfg.out.join(TRAJECTORY_FILE));
            serde_json::to_string_pretty(&experiment::cmd_estimate(&cfg, &path, common.confirm_long)?)?
        }
        Command::Sweep(c) => {
            let report = experiment::cmd_sweep(&c.resolve()?, c.confirm_long)?;
            serde_json::to_string_pretty(&serde_json::json!({ "reference": report.reference, "fits": report.fits }))?
        }
        Command::Mc(c) => {
            let report = experiment::cmd_mc(&c.resolve()?)?;
            serde_json::to_string_pretty(&serde_json::json!({ "slope": report.sweep.slope, "rows": report.sweep.rows }))?
        }
        Command::Config(c) => {
            let cfg = c.resolve()?;
            let seconds = experiment::pipeline_seconds(&cfg)?;
            format!(
                "{}# hash {}\n# estimated solve+estimate seconds {:.3e}{}",
                cfg.to_text(),
                cfg.hash(),
                seconds,
                if seconds > cfg.long_threshold { " (long-running: needs --confirm-long)" } else { "" }
            )
        }
    };
    // A closed pipe (e.g. `| head`) is not an error.
    let _ = writeln!(std::io::stdout(), "{json}");
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if let Some(h) = hint(&err) {
                eprintln!("hint: {h}");
            }
            ExitCode::FAILURE
        }
    }
}
