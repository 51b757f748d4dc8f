use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otoc::{figure2, init_threads, run, CliError, RunConfig};

/// Out-of-time-ordered correlators of spin chains in bosonic baths.
#[derive(Parser)]
#[command(version, after_help = "Set OTOC_THREADS to fix the number of worker threads.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a config and write its CSV.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Write the dephasing bound panels for a 20-site chain.
    Figure2 {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    init_threads()?;
    match cli.command {
        Command::Run { config } => Ok(run::run_file(&config)?.to_string()),
        Command::Validate { config } => Ok(run::validate(&RunConfig::load(&config)?)?.render()),
        Command::Figure2 { out_dir } => Ok(figure2::write_all(&out_dir)?.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // usage mistakes are schema errors; --help and --version are not
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("otoc: {e}");
            e.to_exit()
        }
    }
}
