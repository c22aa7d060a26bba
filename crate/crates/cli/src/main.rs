//! `visco` — experiment front end for the viscoelastic torus solver.
//!
//! Exit codes: 0 ok, 2 config error, 3 singular flow map, 4 iteration
//! failed to converge, 5 step rejected, 6 oracle failure.

mod config;
mod oracle;
mod plot;
mod runner;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{Experiment, ExperimentConfig, Overrides};
use visco_core::error::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CoreError),
    OracleFailed,
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(CoreError::SingularMap { .. }) => 3,
            CliError::Core(CoreError::NoConvergence { .. }) => 4,
            CliError::Core(CoreError::StepRejected { .. }) => 5,
            CliError::OracleFailed => 6,
            // remaining core errors are misconfigured scenarios
            CliError::Core(_) => 2,
            CliError::Io(_) | CliError::Json(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("config error: {m}"),
            CliError::Core(e) => format!("solver error: {e}"),
            CliError::OracleFailed => "oracle suite reported failures".into(),
            CliError::Io(e) => format!("io error: {e}"),
            CliError::Json(e) => format!("serialization error: {e}"),
        }
    }
}

#[derive(Args, Debug, Default)]
struct CommonFlags {
    /// TOML config file; flags below override its keys
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    /// cubic grid size n (n×n×n)
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// time-integration order (1 or 2)
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// run sweep members in worker threads (capped by VISCO_THREADS)
    #[arg(long)]
    parallel: Option<bool>,
}

impl CommonFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            out_dir: self.out_dir.clone(),
            kappa: self.kappa,
            grid: self.grid,
            t_final: self.t_final,
            dt: self.dt,
            order: self.order,
            seed: self.seed,
            parallel: self.parallel,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "visco", version, about = "pseudo-spectral viscoelastic flow experiments on the 3-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Advance a configured scenario and write diagnostics
    Run(CommonFlags),
    /// Run the κ-sweep members and fit the scaling slopes
    Sweep(CommonFlags),
    /// Compare the nonlinear solution against the closed-form linear one
    CompareLinear(CommonFlags),
    /// Track the straightening observable along a run
    Straighten(CommonFlags),
    /// Track the drift residual along a run
    Drift(CommonFlags),
    /// Run the identity/closed-form self-check suite
    Oracle {
        #[command(flatten)]
        flags: CommonFlags,
        /// testing hook: force a failing check (exit 6)
        #[arg(long)]
        inject_fault: bool,
    },
    /// Print a digest of a previously written output directory
    Report {
        /// output directory holding manifest.json and summary.json
        #[arg(long, default_value = "out")]
        out_dir: String,
    },
}

fn load(flags: &CommonFlags, experiment: Experiment) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(flags.config.as_deref(), &flags.overrides())?;
    cfg.experiment = experiment;
    cfg.validate()?;
    Ok(cfg)
}

fn simple_run(cfg: &ExperimentConfig, linear_ref: bool) -> Result<(), CliError> {
    let started = Instant::now();
    let out_dir = runner::prepare_out_dir(cfg)?;
    let run = runner::run_sampled(cfg, linear_ref)?;
    let extra = match cfg.experiment {
        Experiment::CompareLinear => runner::deviation_summary(&run),
        _ => serde_json::json!({}),
    };
    let manifest = runner::write_run_outputs(cfg, &out_dir, &run, extra, started)?;
    println!(
        "wrote {} files to {} (config {})",
        manifest.files.len() + 1,
        out_dir.display(),
        &manifest.config_hash[..12]
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(flags) => {
            let cfg = load(&flags, Experiment::Run)?;
            simple_run(&cfg, false)
        }
        Command::Straighten(flags) => {
            let cfg = load(&flags, Experiment::Straighten)?;
            simple_run(&cfg, false)
        }
        Command::Drift(flags) => {
            let cfg = load(&flags, Experiment::Drift)?;
            simple_run(&cfg, false)
        }
        Command::CompareLinear(flags) => {
            let cfg = load(&flags, Experiment::CompareLinear)?;
            simple_run(&cfg, true)
        }
        Command::Sweep(flags) => {
            let cfg = load(&flags, Experiment::Sweep)?;
            let out_dir = runner::prepare_out_dir(&cfg)?;
            let manifest = runner::cmd_sweep(&cfg, &out_dir)?;
            println!(
                "wrote {} files to {} (config {})",
                manifest.files.len() + 1,
                out_dir.display(),
                &manifest.config_hash[..12]
            );
            Ok(())
        }
        Command::Oracle { flags, inject_fault } => {
            let mut cfg = load(&flags, Experiment::Oracle)?;
            cfg.oracle.inject_fault |= inject_fault;
            let out_dir = runner::prepare_out_dir(&cfg)?;
            let report = oracle::run_oracle(&cfg)?;
            let text = serde_json::to_string_pretty(&report)?;
            std::fs::write(out_dir.join("oracle.json"), &text)?;
            println!("{text}");
            if report.pass {
                Ok(())
            } else {
                Err(CliError::OracleFailed)
            }
        }
        Command::Report { out_dir } => {
            let text = runner::cmd_report(&PathBuf::from(out_dir))?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
