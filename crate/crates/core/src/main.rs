use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qhhg::error::{Error, Result};
use qhhg::runner::{self, CachePolicy, RunConfig};

#[derive(Parser)]
#[command(name = "qhhg", version, about = "Quantum-optical HHG from a driven Hubbard chain")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "qhhg.toml")]
    config: PathBuf,
    /// Comma-separated hierarchy levels, overriding the config.
    #[arg(long, global = true, value_delimiter = ',')]
    levels: Option<Vec<u8>>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Ignore and overwrite existing caches.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the sector basis and diagonalize the field-free Hamiltonian.
    Diagonalize,
    /// Propagate all eigenstates through the pulse and cache the currents.
    Propagate,
    /// Per-mode photon observables for the selected levels.
    Observables,
    /// Deviation of each level from the baseline level.
    Compare,
    /// Repeat the comparison over the configured pulse lengths.
    SweepNc,
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(levels) = cli.levels {
        cfg.photonics.levels = levels;
    }
    if let Some(out) = cli.out {
        cfg.output.dir = out;
    }
    cfg.validate()?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let policy = CachePolicy::from_config(&cfg, cli.force);
    match cli.command {
        Command::Diagonalize => runner::cmd_diagonalize(&cfg, &policy).map(drop),
        Command::Propagate => runner::cmd_propagate(&cfg, &policy).map(drop),
        Command::Observables => runner::cmd_observables(&cfg, &policy).map(drop),
        Command::Compare => runner::cmd_compare(&cfg).map(drop),
        Command::SweepNc => runner::cmd_sweep_nc(&cfg, &policy).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
