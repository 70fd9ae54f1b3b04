use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twophoton_cli::config::extract_overrides;
use twophoton_cli::{cmd_analytic, cmd_hbt, cmd_scan, cmd_speckle, CliError, RunConfig};

/// Two-photon double-slit interference workbench.
///
/// Any config field can be overridden with a dotted flag, e.g.
/// `--geometry.d 0.135e-3` or `--scan.engine=event_mc`.
#[derive(Parser)]
#[command(name = "twophoton", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Closed-form thermal, SPDC and first-order patterns.
    Analytic,
    /// Speckle Monte Carlo of the spatial intensity correlation.
    Speckle,
    /// Time-domain bunching measurement from simulated photon events.
    Hbt,
    /// Detector scan, pattern fit and resolution report.
    Scan,
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<(), CliError> {
    let mut config = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    let written = match cli.command {
        Command::Analytic => cmd_analytic(&config)?,
        Command::Speckle => cmd_speckle(&config)?,
        Command::Hbt => cmd_hbt(&config)?,
        Command::Scan => cmd_scan(&config)?,
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (args, overrides) = extract_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
