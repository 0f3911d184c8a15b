//! `ecgq` — command-line front end of the noise-quantification library.
//!
//! Exit codes: 0 on success, 2 for a bad invocation (unknown flags, invalid
//! values, missing prerequisites the caller must supply), 1 for runtime
//! failures (missing files, malformed data, training errors).

mod args;
mod commands;
mod config;
mod data;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// A bad invocation, distinguished from runtime failure by exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Wrap an invocation mistake so `main` maps it to exit code 2.
pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| anyhow::anyhow!("configuring the thread pool: {e}"))?;
    }
    let resolved = config::Resolved::new(cli.config.as_deref(), cli.seed)?;
    match &cli.command {
        Command::Synth(a) => commands::cmd_synth(&resolved, a),
        Command::Ingest(a) => commands::cmd_ingest(a),
        Command::Aslt(a) => commands::cmd_aslt(&resolved, a),
        Command::Train(a) => commands::cmd_train(&resolved, a),
        Command::Score(a) => commands::cmd_score(&resolved, a),
        Command::Sweep(a) => commands::cmd_sweep(&resolved, a),
        Command::Refine(a) => commands::cmd_refine(&resolved, a),
        Command::Monitor(a) => commands::cmd_monitor(&resolved, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
