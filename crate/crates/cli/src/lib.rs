//! Scenario runner for psdyn: TOML configs, field files and comparison reports.

pub mod config;
pub mod fieldio;
pub mod runner;

pub use config::{Scenario, ScenarioConfig};
pub use runner::{run, sweep_hbar, RunSummary, SweepReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<psdyn::Error> for CliError {
    fn from(e: psdyn::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}
