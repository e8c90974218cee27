//! `possivec` — dataset generation, vectorization, training, classification,
//! leave-one-out evaluation and omega sweeps from one binary.
//!
//! Exit codes: 0 on success, 1 when fold failures were recorded, 2 on
//! usage, format or IO errors.

use clap::Parser;

mod args;
mod cfgfile;
mod cmds;
mod manifest;

use args::{Cli, Command};
use cfgfile::ConfigFile;

fn run(cli: &Cli) -> anyhow::Result<i32> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen(args) => cmds::cmd_gen(args, &cfg),
        Command::Vectorize(args) => cmds::cmd_vectorize(args, &cfg),
        Command::Train(args) => cmds::cmd_train(args, &cfg),
        Command::Classify(args) => cmds::cmd_classify(args),
        Command::Loocv(args) => cmds::cmd_loocv(args, &cfg),
        Command::Sweep(args) => cmds::cmd_sweep(args, &cfg),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
