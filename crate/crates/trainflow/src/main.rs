//! Thin CLI over the experiment runners. Exit codes: 0 on success, 2 on
//! configuration errors, 3 on numerical errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trainflow::bench::{run_experiment, ExperimentConfig, ExperimentKind};
use trainflow::error::Error;

#[derive(Parser)]
#[command(
    name = "trainflow",
    version,
    about = "Training-dynamics experiments for linear system emulators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file mirroring the experiment configuration fields.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also emit SVG plots next to the CSV files.
    #[arg(long)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue histograms of weight initializers.
    Spectrum(RunArgs),
    /// Per-direction convergence curves of the training dynamics.
    Convergence(RunArgs),
    /// Monte Carlo check of the noise-induced bias formulas.
    NoiseBias(RunArgs),
    /// Five-arm comparison of the stability remedies.
    Remedies(RunArgs),
    /// Long-horizon rollout stability of sampled initializers.
    Rollout(RunArgs),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Spectrum(_) => ExperimentKind::Spectrum,
            Command::Convergence(_) => ExperimentKind::Convergence,
            Command::NoiseBias(_) => ExperimentKind::NoiseBias,
            Command::Remedies(_) => ExperimentKind::Remedies,
            Command::Rollout(_) => ExperimentKind::Rollout,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Spectrum(a)
            | Command::Convergence(a)
            | Command::NoiseBias(a)
            | Command::Remedies(a)
            | Command::Rollout(a) => a,
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let kind = cli.command.kind();
    let args = cli.command.args();
    let mut config = ExperimentConfig::from_json_file(&args.config)?;
    if config.experiment != kind {
        return Err(Error::Config(format!(
            "config declares experiment '{}' but the '{}' subcommand was invoked",
            config.experiment.name(),
            kind.name()
        )));
    }
    if let Some(out) = &args.out {
        config.output_dir = Some(out.clone());
    }
    if let Some(seed) = args.seed {
        config.base_seed = Some(seed);
    }
    if args.svg {
        config.emit_svg = true;
    }
    config.validate()?;

    let artifacts = run_experiment(&config)?;
    println!("wrote {}", artifacts.metadata_path.display());
    for path in &artifacts.csv_paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
