use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trapk::experiment::{run, RunArgs};

#[derive(Parser)]
#[command(name = "trapk", version, about = "Trap models, the K process and their scaling limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write report.json plus a CSV table.
    Run(RunArgs),
}

fn main() -> ExitCode {
    let Command::Run(args) = Cli::parse().command;
    let outcome = args.into_config().and_then(|cfg| {
        let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("trapk-out"));
        let out = run(cfg)?;
        let (report, _) = out.write_to(&dir)?;
        print!("{}", out.csv);
        eprintln!("report: {}", report.display());
        Ok(())
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
