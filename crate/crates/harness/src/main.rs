use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use odenet::config::parse_depths;
use odenet::linflow::run_linear_flow_experiment;
use odenet::study::run_scaling_study;
use odenet::tightness::{run_tightness_suite, write_tightness};
use odenet::train::{run_toy_training, write_training};
use odenet::{ExperimentConfig, Result};

#[derive(Parser)]
#[command(
    name = "odenet",
    version,
    about = "Depth-scaling studies for residual networks and their ODE limits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruction and gradient error rates across depths.
    Study(RunArgs),
    /// Closed-form gaps between a chain and its interpolating ODE.
    Tightness(TightnessArgs),
    /// Rescaled gradient flow of a deep linear network.
    Linflow(RunArgs),
    /// Full-batch training of a one-dimensional toy network.
    Train(RunArgs),
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated depth list, e.g. `16,32,64`.
    #[arg(long)]
    depths: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct TightnessArgs {
    #[command(flatten)]
    overrides: Overrides,
}

fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    let o = &args.overrides;
    cfg.apply_overrides(o.seed, o.out.as_deref(), o.depths.as_deref())?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Study(args) => {
            let cfg = load(&args)?;
            let outcome = run_scaling_study(&cfg)?;
            for depth in &outcome.diverged {
                eprintln!("warning: depth {depth} diverged");
            }
            outcome.write_to(&cfg.output_dir)?;
            Ok(cfg.output_dir)
        }
        Command::Tightness(args) => {
            let o = &args.overrides;
            let depths = match &o.depths {
                Some(d) => parse_depths(d)?,
                None => vec![10, 100, 1000],
            };
            let out = o.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let rows = run_tightness_suite(&depths)?;
            write_tightness(&rows, &out)?;
            Ok(out)
        }
        Command::Linflow(args) => {
            let cfg = load(&args)?;
            let outcome = run_linear_flow_experiment(&cfg)?;
            if !outcome.monitors_pass() {
                eprintln!("warning: training monitors reported a violation, see invariants.csv");
            }
            outcome.write_to(&cfg.output_dir, cfg.write_schedules)?;
            Ok(cfg.output_dir)
        }
        Command::Train(args) => {
            let cfg = load(&args)?;
            let runs = run_toy_training(&cfg)?;
            write_training(&runs, &cfg.output_dir)?;
            Ok(cfg.output_dir)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(dir) => {
            println!("wrote {}", Path::new(&dir).display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
