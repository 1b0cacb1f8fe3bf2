//! `graspsense`: dataset generation, training, closed-loop episodes, active
//! identification and evaluation from the command line.
//!
//! Exit status is 0 on success, 1 when a run fails and 2 for usage errors.

mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::RunConfig;
use error::CliResult;

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
}

fn run(cli: Cli) -> CliResult<()> {
    let out = commands::out_dir(cli.out.as_ref())?;
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    }
    .resolve(cli.seed)?;
    match &cli.command {
        Command::Generate(a) => commands::generate(&cfg, &out, a),
        Command::Train(a) => commands::train(&cfg, &out, a),
        Command::Episode(a) => commands::episode(&cfg, &out, a),
        Command::Active(a) => commands::active(&cfg, &out, a),
        Command::Eval(a) => commands::eval(&cfg, &out, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
