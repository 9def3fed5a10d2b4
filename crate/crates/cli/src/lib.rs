//! Command-line driver: simulations to CSV with run manifests, and the
//! verification suites.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;
pub mod suites;

pub use config::{Settings, WindowKind};
pub use suites::{run_suite, Suite, SuiteParams};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] critwin_core::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Core(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Verification(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "critwin", version, about = "Critical-window epidemic simulations and their scaling limits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// `key = value` configuration file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub window: Option<WindowKind>,
    /// Falls back to CW_SEED, then 0
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Worker threads for replicate ensembles
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    fn flag_settings(&self) -> Settings {
        Settings {
            n: self.n,
            x: self.x,
            lambda: self.lambda,
            window: self.window,
            epsilon: self.epsilon,
            seed: self.seed,
            replicates: self.replicates,
        }
    }

    pub fn settings(&self) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(path) => config::load_settings(path)?,
            None => Settings::default(),
        };
        Ok(file.overlay(&self.flag_settings()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("critwin-out"))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample G(n, p), explore from k random roots, write height profiles and cousin series
    SimulateGraph {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write the breadth-first walk over all components
        #[arg(long)]
        walk: bool,
    },
    /// Run the Reed-Frost chain and write height profiles and cousin series
    SimulateChain {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Continuum objects: sde, parabolic, lamperti, hitting, deterministic
    Continuum {
        kind: String,
        #[command(flatten)]
        common: CommonArgs,
        /// Hitting times from grid crossings only, without the bridge correction
        #[arg(long)]
        grid_only: bool,
    },
    /// Run one verification suite and print its reports as JSON
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("critwin: {e}");
            e.exit_code()
        }
    }
}
