//! Command-line front end for the `mocap-doppler` pipeline.

pub mod args;
mod commands;
pub mod render;
pub mod settings;

use anyhow::Result;

use args::{Cli, Command};

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth(a) => commands::synth(g, a),
        Command::Preprocess(a) => commands::preprocess(g, a),
        Command::Train(a) => commands::train_cmd(g, a),
        Command::Ablate(a) => commands::ablate(g, a),
        Command::Infer(a) => commands::infer(g, a),
        Command::Render(a) => commands::render(g, a),
    }
}
