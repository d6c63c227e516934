//! `relu-lab`: experiments, artifact generation and self-verification for
//! one-hidden-layer ReLU convolutional networks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cmd;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use relu_lab::Execution;
use serde::{Deserialize, Serialize};

use crate::io::OutDir;
use crate::manifest::{RunManifest, MANIFEST_FILE};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Lib(#[from] relu_lab::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use relu_lab::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(E::Parse { .. } | E::Shape(_) | E::Parameter(_) | E::TooLarge { .. }) => {
                2
            }
            CliError::Io(_) | CliError::Lib(_) => 1,
        }
    }
}

/// Result of a command that ran to completion. `Failed` still writes its
/// artifacts but exits with status 1.
pub enum Status {
    Ok,
    Failed(String),
}

#[derive(Parser)]
#[command(
    name = "relu-lab",
    version,
    about = "ReLU convolutional network landscape and hardness toolkit"
)]
struct Cli {
    /// Run inner loops on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: TopLevel,
}

#[derive(Subcommand)]
enum TopLevel {
    #[command(flatten)]
    Run(Command),
    /// Rerun the command recorded in a manifest, writing into a new directory.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Gradient descent on the no-overlap population risk with the theorem step size.
    Descend(cmd::descend::DescendArgs),
    /// Loss grid for the two-tap overlapping filter.
    Landscape(cmd::landscape::LandscapeArgs),
    /// 3SAT / set-splitting reduction to a training set.
    Reduce(cmd::reduce::ReduceArgs),
    /// Train on a dataset file or fresh Gaussian data.
    Train(cmd::train::TrainArgs),
    /// Random-restart success rates with Wilson lower bounds.
    Restarts(cmd::restarts::RestartsArgs),
    /// Run the invariant suite.
    Verify(cmd::verify::VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Descend(_) => "descend",
            Command::Landscape(_) => "landscape",
            Command::Reduce(_) => "reduce",
            Command::Train(_) => "train",
            Command::Restarts(_) => "restarts",
            Command::Verify(_) => "verify",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Descend(a) => Some(a.seed),
            Command::Landscape(_) => None,
            Command::Reduce(a) => Some(a.seed),
            Command::Train(a) => Some(a.seed),
            Command::Restarts(a) => Some(a.seed),
            Command::Verify(a) => Some(a.seed),
        }
    }

    fn out(&self) -> Option<&PathBuf> {
        match self {
            Command::Descend(a) => Some(&a.out),
            Command::Landscape(a) => Some(&a.out),
            Command::Reduce(a) => Some(&a.out),
            Command::Train(a) => Some(&a.out),
            Command::Restarts(a) => Some(&a.out),
            Command::Verify(a) => a.out.as_ref(),
        }
    }

    fn set_out(&mut self, out: PathBuf) {
        match self {
            Command::Descend(a) => a.out = out,
            Command::Landscape(a) => a.out = out,
            Command::Reduce(a) => a.out = out,
            Command::Train(a) => a.out = out,
            Command::Restarts(a) => a.out = out,
            Command::Verify(a) => a.out = Some(out),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RELU_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "RELU_LAB_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))
}

fn execute(command: Command, exec: Execution) -> Result<Status, CliError> {
    let started = Instant::now();
    let mut out = command.out().map(|p| OutDir::create(p)).transpose()?;
    let status = match &command {
        Command::Descend(a) => cmd::descend::run(a, out.as_mut().expect("descend has --out"))?,
        Command::Landscape(a) => {
            cmd::landscape::run(a, exec, out.as_mut().expect("landscape has --out"))?
        }
        Command::Reduce(a) => cmd::reduce::run(a, exec, out.as_mut().expect("reduce has --out"))?,
        Command::Train(a) => cmd::train::run(a, out.as_mut().expect("train has --out"))?,
        Command::Restarts(a) => {
            cmd::restarts::run(a, exec, out.as_mut().expect("restarts has --out"))?
        }
        Command::Verify(a) => cmd::verify::run(a, exec, out.as_mut())?,
    };
    if let Some(mut dir) = out {
        let manifest = RunManifest {
            command: command.name().into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: command.seed(),
            execution: exec,
            artifacts: dir.artifacts().to_vec(),
            duration_secs: started.elapsed().as_secs_f64(),
            parameters: command,
        };
        dir.write_json(MANIFEST_FILE, &manifest)?;
    }
    Ok(status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::available()
    };
    let result = configure_threads().and_then(|()| match cli.command {
        TopLevel::Run(command) => execute(command, exec),
        TopLevel::Replay { manifest, out } => {
            let text = io::read_input(&manifest)?;
            let recorded: RunManifest = serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("{}: not a run manifest: {e}", manifest.display()))
            })?;
            let mut command = recorded.parameters;
            command.set_out(out);
            execute(command, recorded.execution)
        }
    });
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed(msg)) => {
            eprintln!("relu-lab: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("relu-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
