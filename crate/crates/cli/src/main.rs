use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod bench;
mod generate;
mod manifest;
mod output;
mod report;
mod run;
mod simulate;

/// Streaming dataflow model of a point-cloud network accelerator.
#[derive(Debug, Parser)]
#[command(name = "pcnflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic sparse events.
    Generate(generate::GenerateArgs),
    /// Run the golden model over an event file.
    Run(run::RunArgs),
    /// Map the network and simulate it cycle by cycle.
    Simulate(simulate::SimulateArgs),
    /// Evaluate the performance model over a set of configurations.
    Bench(bench::BenchArgs),
    /// Write a markdown performance report.
    Report(report::ReportArgs),
}

/// Simulator outputs differ from the golden model.
#[derive(Debug)]
pub struct MismatchError(pub usize);

impl std::fmt::Display for MismatchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} events differ from the golden model", self.0)
    }
}

impl std::error::Error for MismatchError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<MismatchError>() {
            return 6;
        }
        if let Some(e) = cause.downcast_ref::<pcnflow::Error>() {
            return match e {
                pcnflow::Error::Config(_)
                | pcnflow::Error::Mapping { .. }
                | pcnflow::Error::Precondition(_) => 3,
                pcnflow::Error::Data(_) => 4,
                pcnflow::Error::Deadlock { .. } => 5,
                pcnflow::Error::Io { .. } => 7,
            };
        }
        if cause.is::<std::io::Error>() {
            return 7;
        }
    }
    1
}

/// Error chain on one line, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    let mut last = out.clone();
    for cause in err.chain().skip(1) {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            out = format!("{out}: {msg}");
        }
        last = msg;
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate::run(a),
        Command::Run(a) => run::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Report(a) => report::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
