//! `sma`: identify thermal models, run trials and sweeps, analyze logs,
//! select the long-life temperature limit and run the A/B degradation check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Outcome;

#[derive(Parser)]
#[command(name = "sma", version, about = "SMA artificial-muscle long-life force workbench")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the first-order thermal model to a log or a synthetic excitation.
    Identify(commands::IdentifyArgs),
    /// Run one trial and write its CSV log.
    Simulate(commands::SimulateArgs),
    /// Run every (profile, temperature) cell of a sweep.
    Sweep(commands::SweepArgs),
    /// Per-cycle peak forces, decay fits, force curves and figures.
    Analyze(commands::AnalyzeArgs),
    /// Pick the conservative long-life temperature from force curves.
    Limit(commands::LimitArgs),
    /// Compare wires fatigued at a low and a high limit.
    Validate(commands::ValidateArgs),
    /// Plot a trial log.
    Plot(commands::PlotArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let result = match cli.command {
        Command::Identify(a) => commands::identify(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Limit(a) => commands::limit(a),
        Command::Validate(a) => commands::validate(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(3),
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::from(1)
        }
    }
}
