mod args;
mod commands;
mod report;
mod status;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use status::Status;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let status = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Status::Success,
                _ => Status::Usage,
            };
            let _ = e.print();
            return ExitCode::from(status.code());
        }
    };
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Validate(a) => commands::validate(a),
        Command::Plan(a) => commands::plan(a),
        Command::Schedule(a) => commands::schedule(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Compare(a) => commands::compare(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Campaign(a) => commands::campaign(a),
    };
    match result {
        Ok(()) => ExitCode::from(Status::Success.code()),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.status.code())
        }
    }
}
