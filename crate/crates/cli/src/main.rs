use std::fs;
use std::process::ExitCode;

use clap::Parser;
use ipir_cli::args::{Cli, Command};
use ipir_cli::commands::{self, Outcome, RunResult};
use ipir_cli::{render, CliError, CliResult};

fn emit(outcome: Outcome) -> CliResult<()> {
    match &outcome.output {
        Some(path) => {
            fs::write(path, &outcome.json).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            let value: serde_json::Value = serde_json::from_str(&outcome.json).expect("report is JSON");
            print!("{}", render::render(&value));
        }
        None => print!("{}", outcome.json),
    }
    commands::check(&outcome)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::SolveLp(a) => emit(commands::solve_lp(&a)?),
        Command::Greedy(a) => emit(commands::greedy(&a)?),
        Command::TwoRequest(a) => emit(commands::two_request(&a)?),
        Command::SimulateLocation(a) => emit(commands::simulate_location(&a)?),
        Command::Audit(a) => emit(commands::audit(&a)?),
        Command::Serve(a) => commands::serve(&a),
        Command::Upload(a) => emit(commands::upload(&a)?),
        Command::Report(a) => {
            print!("{}", commands::report(&a)?);
            Ok(())
        }
        Command::Run(a) => match commands::run_scenario(&a.scenario, a.output)? {
            RunResult::Report(o) => emit(o),
            RunResult::Served => Ok(()),
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IPIR_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ipir: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
