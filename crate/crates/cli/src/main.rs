use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ntci::commands::{self, constants::ConstantsArgs};
use ntci::error::EXIT_OK;
use ntci::{ExperimentConfig, RayonExecutor, Result};

#[derive(Parser)]
#[command(name = "ntci", version, about = "Simulate neutral functional SDEs and check transportation cost inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment config (TOML)
    config: PathBuf,
    /// Override a config value, e.g. `--set sim.n_paths=512`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form constants, or a CSV sweep over a parameter grid
    Constants(ConstantsArgs),
    /// Simulate the reference ensemble and write one file per path
    Simulate(ConfigArgs),
    /// Run the tilted/reference coupling and the importance check
    Couple(ConfigArgs),
    /// Check an inequality end to end and write the report
    Verify(ConfigArgs),
    /// Estimate the integrator's convergence orders
    Convergence(ConfigArgs),
}

type Runner = fn(&ExperimentConfig, &RayonExecutor) -> Result<String>;

fn with_config(args: &ConfigArgs, f: Runner) -> Result<String> {
    let cfg = ExperimentConfig::load(&args.config, &args.set)?;
    let exec = RayonExecutor::new(cfg.threads)?;
    f(&cfg, &exec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Constants(a) => commands::constants::run(a),
        Command::Simulate(a) => with_config(a, commands::simulate::execute),
        Command::Couple(a) => with_config(a, commands::couple::execute),
        Command::Verify(a) => with_config(a, commands::verify::execute),
        Command::Convergence(a) => with_config(a, commands::convergence::execute),
    };
    match out {
        Ok(text) => {
            print!("{text}");
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
