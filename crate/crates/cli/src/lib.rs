//! The `mechcat` command-line tool.

pub mod commands;
pub mod config;
pub mod golden;
pub mod table;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::Config;
pub use table::{Format, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Module(#[from] mechcat_core::Error),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mechcat", version, about = "Heralded two-mode mechanical cat states: tables, maps and verification runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario config file (TOML sections with grid syntax).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output if omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for grid points (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Compare against bundled golden values; exit 2 on a tolerance failure.
    #[arg(long, global = true)]
    pub check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Determinants and true-positive fractions of the Table 1 parameter sets.
    Table1,
    /// Sideband-ratio corrections to mu for the Table 2 devices.
    Table2,
    /// D5, S3 or non-Gaussianity over a (mu, phi) grid.
    Map,
    /// Largest initial occupation that keeps S3 negative, over (mu, nbar_B).
    CoolingMap,
    /// True-positive fractions over (mu, eta, alpha).
    Detector,
    /// Simulated homodyne verification: recovered versus exact moments.
    Verify,
    /// Coupling reduction from mechanical motion during the pulse, over pulse length.
    Sideband,
}

/// Result of a run: the table and any failed golden checks (`None` without `--check`).
pub struct Outcome {
    pub table: Table,
    pub check_failures: Option<Vec<String>>,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let seed = match cli.seed {
        Some(s) => s,
        None => config.integer("seed", 0)?,
    };
    let work = || commands::dispatch(cli.command, &config, seed, cli.check);
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Parses `args`, runs, writes output, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("mechcat: {e}");
            return EXIT_ERROR;
        }
    };
    let text = match outcome.table.render(cli.format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("mechcat: {e}");
            return EXIT_ERROR;
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string())
        }
    };
    if let Err(e) = written {
        eprintln!("mechcat: i/o error: {e}");
        return EXIT_ERROR;
    }
    match outcome.check_failures {
        Some(failures) if !failures.is_empty() => {
            for f in &failures {
                eprintln!("check failed: {f}");
            }
            EXIT_CHECK_FAILED
        }
        Some(_) => {
            eprintln!("check passed");
            EXIT_OK
        }
        None => EXIT_OK,
    }
}
