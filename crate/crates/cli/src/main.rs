//! `clickwit`: crystal generation, click simulation, stream analysis,
//! prediction and size sweeps. Every run writes a manifest that `replay`
//! turns back into the same outputs.

mod args;
mod manifest;
mod plan;
mod run;

use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use clickwit_core::Error;

use args::{Cli, Command};
use manifest::RunManifest;

/// Flag combination the parser could not reject on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_IO: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DOMAIN: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::InvalidParameter { .. } | Error::Config(_) => EXIT_USAGE,
                Error::Io(_) | Error::Csv(_) | Error::Stream(_) | Error::Layout(_) => EXIT_IO,
                _ => EXIT_DOMAIN,
            };
        }
    }
    EXIT_IO
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let plan = match cli.command {
        Command::Crystal(c) => c.resolve()?,
        Command::Simulate(c) => c.resolve()?,
        Command::Analyze(c) => c.resolve()?,
        Command::Predict(c) => c.resolve()?,
        Command::Sweep(c) => c.resolve()?,
        Command::Replay(c) => RunManifest::read(&c.manifest)?.plan,
    };
    let outcome = run::execute(&plan, &cli.out_dir).with_context(|| format!("{} failed", plan.name()))?;
    let manifest = RunManifest::new(plan, outcome.artifacts);
    let name = manifest.write(&cli.out_dir)?;
    if let Some(text) = outcome.stdout {
        print!("{text}");
    }
    for a in manifest.artifacts.iter().chain([&name]) {
        eprintln!("wrote {}", cli.out_dir.join(a).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
