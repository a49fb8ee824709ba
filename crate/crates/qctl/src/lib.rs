//! Configured experiments for chirped-pulse population transfer: CSV rows,
//! SVG plots and key-value summaries with pass/fail verdicts.

pub mod config;
pub mod experiments;
pub mod grid;
pub mod output;
pub mod plot;
pub mod runner;

pub use config::{Config, ConfigFile, Experiment, Overrides};
pub use experiments::{run, ExperimentResult, Verdict};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rwa_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    /// 2 for configuration and precondition failures, 3 for resource caps,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use rwa_core::Error as E;
        match self {
            RunError::Config(_) => 2,
            RunError::Core(E::ResourceCap { .. }) => 3,
            RunError::Core(E::Contract(_)) | RunError::Core(E::InsufficientData { .. }) => 1,
            RunError::Core(_) => 2,
            RunError::Io(_) | RunError::Csv(_) => 1,
        }
    }
}
