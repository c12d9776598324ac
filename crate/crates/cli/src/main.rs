mod commands;
mod spec;

use clap::{Parser, Subcommand};
use commands::{AppError, Context};
use spec::RunSpec;
use std::path::PathBuf;
use std::process::ExitCode;

/// Boundary-controlled optimal mixing in a periodic channel.
#[derive(Parser)]
#[command(name = "optmix", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    output: Option<PathBuf>,
    /// RNG seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread bound. Defaults to 1 for reproducible runs.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow and scalar forward under the configured control.
    Simulate(CommonArgs),
    /// Gradient descent on the regularized control problem.
    Optimize(CommonArgs),
    /// Warm-started descent over a decreasing epsilon schedule.
    SweepEpsilon(CommonArgs),
    /// Verification suite at the configured resolution.
    Check(CommonArgs),
    /// Print the mix-norm of a scalar snapshot.
    Mixnorm {
        /// Snapshot file written by `simulate`.
        snapshot: PathBuf,
    },
}

fn load_context(args: &CommonArgs) -> Result<Context, AppError> {
    let spec_text = std::fs::read_to_string(&args.config).map_err(|e| {
        AppError::Config(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let spec: RunSpec = serde_json::from_str(&spec_text)
        .map_err(|e| AppError::Config(format!("invalid config: {e}")))?;
    let output = args
        .output
        .clone()
        .or_else(|| spec.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&output).map_err(|e| {
        AppError::Config(format!("cannot create output dir {}: {e}", output.display()))
    })?;
    let seed = args.seed.unwrap_or(spec.seed);
    if args.threads == 0 {
        return Err(AppError::Config("--threads must be at least 1".into()));
    }
    Ok(Context {
        spec,
        spec_text,
        output,
        seed,
        threads: args.threads,
    })
}

fn run() -> Result<(), AppError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(args) => commands::run_simulate(&load_context(args)?),
        Command::Optimize(args) => commands::run_optimize(&load_context(args)?),
        Command::SweepEpsilon(args) => commands::run_sweep_epsilon(&load_context(args)?),
        Command::Check(args) => commands::run_checks(&load_context(args)?),
        Command::Mixnorm { snapshot } => commands::run_mixnorm(snapshot),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
