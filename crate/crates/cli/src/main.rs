mod commands;
mod config;
mod error;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::LevelFilter;

use commands::{Command, Ctx, COMMANDS};
use config::ConfigFile;
use error::CliResult;

/// Multidimensional aging rates from cross-sectional lab panels.
#[derive(Debug, Parser)]
#[command(name = "agingrates", version)]
struct Cli {
    /// Seed for every stochastic step (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML config: optional top-level `seed` and one table per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value = "warn")]
    log_level: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

fn run(cli: &Cli) -> CliResult<()> {
    let config = ConfigFile::load(cli.config.as_deref(), &COMMANDS)?;
    let mut ctx = Ctx::new(cli.command.name(), cli.seed, config, cli.out.clone());
    let outputs = cli.command.run(&mut ctx)?;
    let manifest = ctx.manifest()?;
    outputs.commit(&cli.out, manifest)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json(cli.command.name()));
            ExitCode::from(e.exit_code())
        }
    }
}
