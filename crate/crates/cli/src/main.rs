mod args;
mod commands;
mod error;
mod manifest;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use manifest::RunManifest;

fn execute(cmd: &Command, threads: Option<usize>) -> Result<()> {
    if let Command::Replay(a) = cmd {
        return manifest::replay(a, threads, execute);
    }
    let mut cmd = cmd.clone();
    cmd.resolve()?;
    let start = Instant::now();
    let results = match &cmd {
        Command::Phantom(a) => commands::phantom(a)?,
        Command::Project(a) => commands::project(a)?,
        Command::Noise(a) => commands::noise(a)?,
        Command::Recon(a) => commands::recon(a)?,
        Command::Train(a) => commands::train_cmd(a)?,
        Command::Eval(a) => commands::eval(a)?,
        Command::Sweep(a) => commands::sweep(a)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    RunManifest::new(&cmd, threads, start.elapsed().as_secs_f64(), results).write()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads.filter(|n| *n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(error::EXIT_RUNTIME);
        }
    }
    match execute(&cli.command, cli.threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error::exit_code(&e))
        }
    }
}
