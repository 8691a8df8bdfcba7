mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn run(cli: &Cli) -> qperc::Result<()> {
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Threshold(a) => commands::threshold(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Scaling(a) => commands::scaling(a),
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 2.
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("qperc: cannot set up {jobs} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed pipe downstream (`| head`) is not our failure.
        Err(qperc::Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qperc: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
