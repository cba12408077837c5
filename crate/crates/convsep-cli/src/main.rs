use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use convsep_cli::commands::{
    cmd_evaluate, cmd_experiment, cmd_separate, cmd_toy_demo, cmd_train, EvaluateArgs,
    ExperimentArgs, SeparateArgs, ToyDemoArgs, TrainArgs,
};

/// Convolutive non-negative autoencoder models for two-source audio
/// separation.
#[derive(Parser)]
#[command(name = "convsep", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a source model on a directory of clean WAV utterances
    Train(TrainArgs),
    /// Separate a two-source mixture WAV with two trained models
    Separate(SeparateArgs),
    /// Score separated estimates against reference signals
    Evaluate(EvaluateArgs),
    /// Run the train/separate/score protocol over a corpus
    Experiment(ExperimentArgs),
    /// Train on the synthetic stripe pattern and dump filters and
    /// activations as CSV matrices
    ToyDemo(ToyDemoArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => {
            eprint!("{e}");
            std::process::exit(1); // bad flags are config errors
        }
    };
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Separate(args) => cmd_separate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::ToyDemo(args) => cmd_toy_demo(args),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
