//! The `flowgnn` command line. Each subcommand is one pipeline stage that
//! reads files and writes files or JSON lines; logs go to standard error.
//!
//! Every run (except `replay`) writes `<out>/<command>.config.json` holding
//! its argument vector and resolved seed, which `flowgnn replay` re-executes.

mod args;
mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Check(_) => EXIT_CHECK,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(
    std::io::Error,
    serde_json::Error,
    flowgnn_core::dataset::DatasetError,
    flowgnn_core::dataset::SchemaError,
    flowgnn_core::analysis::AnalysisError,
    flowgnn_core::graph::GraphError,
    flowgnn_core::vocab::VocabError,
    flowgnn_model::ModelError,
    flowgnn_tensor::TensorError
);

/// The replayable record of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub command: String,
    pub seed: u64,
    /// Working directory that relative paths in `argv` resolve against.
    pub cwd: PathBuf,
    /// Arguments after the program name.
    pub argv: Vec<String>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();

    let result = echo_config(&cli, &argv).and_then(|()| commands::dispatch(&cli));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("flowgnn: {e}");
            e.exit_code()
        }
    }
}

fn echo_config(cli: &Cli, argv: &[OsString]) -> Result<(), CliError> {
    if matches!(cli.command, Command::Replay { .. }) {
        return Ok(());
    }
    let echo = ConfigEcho {
        command: cli.command.name().to_string(),
        seed: cli.seed,
        cwd: std::env::current_dir()?,
        argv: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
    };
    std::fs::create_dir_all(&cli.out)?;
    let path = cli.out.join(format!("{}.config.json", echo.command));
    std::fs::write(&path, serde_json::to_string_pretty(&echo)? + "\n")?;
    log::info!("config echo written to {}", path.display());
    Ok(())
}

/// Reads a config echo written by an earlier run.
pub fn read_echo(path: &Path) -> Result<ConfigEcho, CliError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
