//! Active output selection: learning several single-output Gaussian-process
//! models over one shared input space, where every measurement reveals all
//! outputs at once and the strategies differ only in which model decides
//! where to measure next.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command-line
//! interface and parallel batch execution live in the `aos` crate.
//!
//! Modules:
//! * [`gp`] – squared-exponential GP regression with marginal-likelihood fitting.
//! * [`strategies`] – the SQ, RR, G, CVH and SF query strategies.
//! * [`processes`] – synthetic multi-output test processes with calibrated noise.
//! * [`metrics`] – cross-validation error and validation NRMSE.
//! * [`jura`] – the Jura heavy-metal table adapted to the strategy interface.
//! * [`experiment`] – the single-run driver and learning-curve aggregation.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod linalg;
mod math;

pub mod experiment;
pub mod gp;
pub mod jura;
pub mod metrics;
pub mod processes;
pub mod rng;
pub mod strategies;

pub use error::{AosError, Result};

pub use experiment::{aggregate, compare_savings, run_single, CurveSummary, ExperimentSettings, RunEntry, RunProblem, RunRecord, Savings};
pub use gp::{GpHyperparams, GpModel, Prediction};
pub use strategies::{QueryProposal, StrategyKind, StrategyState};

