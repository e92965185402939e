//! Command-line driver: data preparation, training, evaluation and the
//! synthetic-graph harness, plus the configuration and checkpoint formats
//! they share.

pub mod args;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod prepared;

pub use args::{Cli, Command};
pub use checkpoint::Checkpoint;
pub use config::RunConfig;

use std::io::Write;

/// Runs one parsed command line.
pub fn run(cli: &Cli, log: &mut dyn Write) -> anyhow::Result<()> {
    match &cli.command {
        Command::Prepare(a) => commands::prepare(&a.resolve()?, log).map(drop),
        Command::Train(a) => commands::train(&a.resolve()?, &a.data, log).map(drop),
        Command::Eval(a) => commands::eval(&a.resolve()?, &a.data, &a.checkpoint, log).map(drop),
        Command::Synth(a) => commands::synth(&a.resolve()?, log).map(drop),
    }
}
