//! Experiment harness for active output selection: configuration files,
//! seeded batch execution, result files and plots. The algorithms live in
//! `aos-core`.

pub mod batch;
pub mod config;
pub mod error;
pub mod jura_io;
pub mod output;

pub use batch::{run_batch, BatchOutcome, RunFailure, Schedule};
pub use config::{ExperimentConfig, ProblemConfig};
pub use error::{CliError, Result};
