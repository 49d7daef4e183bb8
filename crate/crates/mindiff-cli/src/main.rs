//! Command line front end for the fairness regularization lab.

mod config;
mod failure;
mod fetch_cmd;
mod manifest;
mod pairwise_cmd;
mod setup;
mod sweep_cmd;
mod train_cmd;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "mindiff",
    version,
    about = "Train classifiers with MinDiff penalties and map the accuracy/fairness trade-off"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one classifier (or several seeds) and write evaluation artifacts
    Train(train_cmd::TrainArgs),
    /// Sweep penalty weight across variants and write sweep.csv
    Sweep(sweep_cmd::SweepArgs),
    /// Sweep kernel length for the mmd variants and write kernel_sweep.csv
    KernelSweep(sweep_cmd::KernelSweepArgs),
    /// Compute the accuracy/fairness Pareto front of a sweep
    Pareto(sweep_cmd::ParetoArgs),
    /// Synthetic click-bias study for the pairwise ranking variant
    PairwiseSim(pairwise_cmd::PairwiseSimArgs),
    /// Download the census files and verify their content
    FetchData(fetch_cmd::FetchArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; only real usage errors
            // are failures.
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let outcome = match &cli.command {
        Command::Train(args) => train_cmd::run(args),
        Command::Sweep(args) => sweep_cmd::run_sweep_cmd(args),
        Command::KernelSweep(args) => sweep_cmd::run_kernel_sweep_cmd(args),
        Command::Pareto(args) => sweep_cmd::run_pareto_cmd(args),
        Command::PairwiseSim(args) => pairwise_cmd::run(args),
        Command::FetchData(args) => fetch_cmd::run(args),
    };
    if let Err(failure) = outcome {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
