mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::{run_analytic, run_compare, run_popdyn_command, run_simulate};
use crate::config::{Cli, Command, RunConfig};

const EXIT_USAGE: u8 = 1;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(command: &Command) -> anyhow::Result<u8> {
    let cfg = RunConfig::resolve(command)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let outcome = pool.install(|| match command {
        Command::Analytic(_) => run_analytic(&cfg),
        Command::Simulate(_) => run_simulate(&cfg),
        Command::Compare(_) => run_compare(&cfg),
        Command::Popdyn(_) => run_popdyn_command(&cfg),
    })?;
    Ok(outcome.code())
}
