//! Experiment runner for the girg simulator: config parsing, scan execution,
//! CSV/JSON output and measured-vs-predicted exponent reports.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind, OutputFormat};
pub use report::Report;
pub use run::run_experiment;

/// Errors mapped onto process exit codes: config errors exit 2, regime errors
/// exit 3; acceptance-comparison failures are reported via `Report::passed`
/// and exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Regime(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Regime(msg) => write!(f, "regime error: {msg}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<girg::Error> for CliError {
    fn from(e: girg::Error) -> Self {
        match e {
            girg::Error::Regime(msg) => CliError::Regime(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Regime(_) => 3,
        }
    }
}
