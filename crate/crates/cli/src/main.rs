use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod experiments;
mod manifest;

/// Exact stochastic simulation and large-population limits of epidemics
/// with random, infection-age-dependent infectivity.
#[derive(Parser)]
#[command(name = "epivolt", version)]
struct Cli {
    /// Worker threads (defaults to the number of cores); results do not
    /// depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output_dir` of the file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration file without running it.
    Validate { config: PathBuf },
}

const CONFIG_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot set up {k} threads: {e}");
            return ExitCode::from(RUNTIME_ERROR);
        }
    }
    match cli.command {
        Command::Validate { config } => match config::load(&config) {
            Ok(v) => {
                println!("{}: ok ({:?})", config.display(), v.raw.experiment);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(CONFIG_ERROR)
            }
        },
        Command::Run { config, out } => {
            let cfg = match config::load(&config) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            let dir = out
                .or_else(|| cfg.raw.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let result = experiments::run(&cfg).and_then(|outputs| {
                let manifest = outputs.write_all(&dir)?;
                for name in outputs.names() {
                    println!("{}", dir.join(name).display());
                }
                println!("{}", manifest.display());
                Ok(())
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(RUNTIME_ERROR)
                }
            }
        }
    }
}
