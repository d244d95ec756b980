use std::path::PathBuf;

use thiserror::Error;

use quadservo_sim::SimError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown scenario `{0}` (see `list-scenarios`)")]
    UnknownScenario(String),
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("simulation failed: {0}")]
    Simulation(#[from] SimError),
    #[error("controller fault at t = {time:.4} s: {message}")]
    Controller { time: f64, message: String },
    #[error("runs are not comparable: {0}")]
    Mismatch(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error on {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl HarnessError {
    /// Process exit code for the CLI: 2 configuration, 3 simulation, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_)
            | HarnessError::UnknownScenario(_)
            | HarnessError::Parse { .. }
            | HarnessError::Mismatch(_) => 2,
            HarnessError::Simulation(_) | HarnessError::Controller { .. } => 3,
            HarnessError::Io { .. } | HarnessError::Csv { .. } => 4,
        }
    }
}
