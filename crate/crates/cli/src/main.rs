//! `rcm`: mobility matrices, homogenization sweeps and validation runs driven
//! by a single JSON config. Run `rcm defaults` for a complete config with
//! every default spelled out.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::{Format, RunConfig};
use output::{Provenance, Writer};

#[derive(Parser)]
#[command(name = "rcm", version, about = "Complex mobility of random conductance walks on discrete tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run config; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for matrix tables, overriding `output.format`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Mobility matrix per (N, omega, seed) from the iterative corrector solve.
    Mobility,
    /// N sweep over seeds with the cross-seed convergence report.
    Sweep,
    /// Identity checks and the Floquet linear-response comparison.
    Validate,
    /// Mobility matrices through the dense LU route.
    Oracle,
    /// Periodic steady state of the driven walk and its velocity.
    Floquet,
    /// Print the default config.
    Defaults,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Mobility => "mobility",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
            Command::Oracle => "oracle",
            Command::Floquet => "floquet",
            Command::Defaults => "defaults",
        }
    }
}

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.command == Command::Defaults {
        let text = serde_json::to_string_pretty(&RunConfig::default()).expect("defaults serialize");
        println!("{text}");
        return Ok(());
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let format = cli.format.unwrap_or(cfg.output.format);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Failure::Io(std::io::Error::other(e)))?;
    let mut writer = Writer::new(&dir, Provenance::new(cli.command.name(), &cfg))?;
    pool.install(|| match cli.command {
        Command::Mobility => commands::mobility(&cfg, &mut writer, format),
        Command::Oracle => commands::oracle(&cfg, &mut writer, format),
        Command::Sweep => commands::sweep(&cfg, &mut writer, format),
        Command::Validate => commands::validate(&cfg, &mut writer),
        Command::Floquet => commands::floquet(&cfg, &mut writer),
        Command::Defaults => unreachable!(),
    })?;
    let files = writer.finish()?;
    eprintln!("{}: wrote {} files to {}", cli.command.name(), files.len() + 1, dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numeric failure: {e}");
            ExitCode::from(EXIT_NUMERIC)
        }
        Err(Failure::Io(e)) => {
            eprintln!("io error: {e}");
            ExitCode::from(EXIT_IO)
        }
    }
}
