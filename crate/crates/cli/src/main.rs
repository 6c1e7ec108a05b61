mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lipselect::par::{self, Mode};
use lipselect::Error;

use crate::config::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "lipselect",
    version,
    about = "Pointwise Lipschitz selections and homogeneous right inverses"
)]
struct Cli {
    /// JSON file with default values for the command's flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximal separation of a space at one radius, or the dyadic hierarchy
    Separate(commands::SeparateArgs),
    /// Run the selection iteration on a correspondence
    Select(commands::SelectArgs),
    /// Pointwise Lipschitz profiles of a sampled map
    Plip(commands::PlipArgs),
    /// Build and verify a homogeneous right inverse of a matrix
    BartleGraves(commands::BartleGravesArgs),
    /// Recheck a stored selection sequence round by round
    Verify(commands::VerifyArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("LIPSELECT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        CliError::Core(Error::Parameter {
            name: "LIPSELECT_THREADS",
            reason: format!("expected a nonnegative integer, got {raw:?}"),
        })
    })?;
    if threads == 0 {
        par::set_mode(Mode::Sequential);
    } else {
        par::set_mode(Mode::Parallel);
        // a pool may already exist when embedded; the cap is best effort then
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let cfg = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Separate(a) => commands::separate(config::merge(a, &cfg)?),
        Command::Select(a) => commands::select(config::merge(a, &cfg)?),
        Command::Plip(a) => commands::plip(config::merge(a, &cfg)?),
        Command::BartleGraves(a) => commands::bartle_graves(config::merge(a, &cfg)?),
        Command::Verify(a) => commands::verify(config::merge(a, &cfg)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("lipselect: one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("lipselect: {e}");
            if let Some(name) = e.parameter() {
                eprintln!("parameter: {name}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
