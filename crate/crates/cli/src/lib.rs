//! `ildls` command-line driver.
//!
//! Every subcommand takes `--config <file>` and any number of
//! `--set key=value` overrides applied on top of it. Exit status is 0 on
//! success, 1 for usage or configuration errors and 2 when the run itself
//! fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ildls_core::config::RunConfig;
use thiserror::Error;

mod commands;

pub use commands::{kernel_file_name, load_bank, required_defocus};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: ildls_core::Error,
    },

    #[error(transparent)]
    Core(#[from] ildls_core::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(ildls_core::Error::Config { .. }) => 1,
            _ => 2,
        }
    }

    pub(crate) fn file(path: &Path) -> impl FnOnce(ildls_core::Error) -> Self + '_ {
        move |source| CliError::File {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ildls", version, about = "Level-set inverse lithography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// key = value configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build TCC eigen-kernels and write one LKRN file per defocus
    GenKernels(Common),
    /// Synthesize rectilinear layout clips (PGM + JSON)
    GenLayouts(Common),
    /// Aerial image and printed pattern of a mask
    Simulate(Common),
    /// Optimize a mask for each target
    Ilt(Common),
    /// EDE and worst-case ILS of masks against targets
    Metrics(Common),
    /// Process-window curve of masks against targets
    Pw(Common),
    /// Loss and level-set gradient for a given psi
    ExportGrad(Common),
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg.resolved()?)
    }
}

/// Runs one invocation; `args` includes the program name.
pub fn run_command<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ildls: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    use commands as c;
    match command {
        Command::GenKernels(a) => c::gen_kernels(&a.load()?),
        Command::GenLayouts(a) => c::gen_layouts(&a.load()?),
        Command::Simulate(a) => c::simulate(&a.load()?),
        Command::Ilt(a) => c::ilt(&a.load()?),
        Command::Metrics(a) => c::metrics(&a.load()?),
        Command::Pw(a) => c::pw(&a.load()?),
        Command::ExportGrad(a) => c::export_grad(&a.load()?),
    }
}
