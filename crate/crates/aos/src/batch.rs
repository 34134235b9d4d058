//! Runs every strategy on every seeded run of a config.

use aos_core::experiment::{run_seed, run_single, RunProblem, RunRecord};
use aos_core::jura::JuraTable;
use aos_core::processes::{builtin_setup, SetupSpec};
use aos_core::{AosError, StrategyKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ProblemConfig};
use crate::error::Result;
use crate::jura_io::load_jura;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Sequential,
    /// Independent runs on the rayon thread pool.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub strategy: Option<StrategyKind>,
    pub message: String,
    /// The run could not start because of its configuration.
    pub config: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// Ordered by run, then by the config's strategy order.
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub run_seeds: Vec<u64>,
    pub dim: usize,
    pub output_names: Vec<String>,
}

enum Source {
    Synthetic(SetupSpec),
    Jura { table: JuraTable, metals: Vec<String> },
}

impl Source {
    fn resolve(config: &ExperimentConfig) -> Result<Self> {
        Ok(match &config.problem {
            ProblemConfig::Builtin { name } => Source::Synthetic(builtin_setup(name).expect("validated setup name")),
            ProblemConfig::Custom { setup } => Source::Synthetic(setup.clone()),
            ProblemConfig::Jura { data, metals } => Source::Jura {
                table: load_jura(data)?,
                metals: metals.clone(),
            },
        })
    }

    fn layout(&self) -> (usize, Vec<String>) {
        match self {
            Source::Synthetic(setup) => (setup.dim, (1..=setup.outputs.len()).map(|m| format!("y{m}")).collect()),
            Source::Jura { table, metals } => (
                2,
                metals
                    .iter()
                    .map(|m| table.metal_index(m).map_or_else(|| m.clone(), |k| table.metals[k].clone()))
                    .collect(),
            ),
        }
    }

    fn problem(&self, config: &ExperimentConfig, seed: u64) -> aos_core::Result<RunProblem> {
        match self {
            Source::Synthetic(setup) => RunProblem::synthetic(setup, &config.settings, seed),
            Source::Jura { table, metals } => {
                let metals: Vec<&str> = metals.iter().map(String::as_str).collect();
                RunProblem::jura(table, &metals, &config.settings, seed)
            }
        }
    }
}

fn one_run(source: &Source, config: &ExperimentConfig, run: usize) -> (Vec<RunRecord>, Vec<RunFailure>) {
    let seed = run_seed(config.master_seed, run);
    let problem = match source.problem(config, seed) {
        Ok(p) => p,
        Err(e) => {
            return (
                Vec::new(),
                vec![RunFailure {
                    run,
                    strategy: None,
                    message: e.to_string(),
                    config: matches!(e, AosError::Config(_)),
                }],
            )
        }
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &kind in &config.strategies {
        match run_single(&problem, kind, &config.settings, run) {
            Ok(r) => records.push(r),
            Err(e) => failures.push(RunFailure {
                run,
                strategy: Some(kind),
                message: e.to_string(),
                config: matches!(e, AosError::Config(_)),
            }),
        }
    }
    (records, failures)
}

/// Executes `runs × strategies` experiments. A failing run is reported in
/// the outcome and the batch continues; `progress` is called after each
/// finished run with its index.
pub fn run_batch(config: &ExperimentConfig, schedule: Schedule, progress: &(dyn Fn(usize) + Sync)) -> Result<BatchOutcome> {
    config.validate()?;
    let source = Source::resolve(config)?;
    let (dim, output_names) = source.layout();
    let work = |run: usize| {
        let out = one_run(&source, config, run);
        progress(run);
        out
    };
    let per_run: Vec<(Vec<RunRecord>, Vec<RunFailure>)> = match schedule {
        Schedule::Sequential => (0..config.runs).map(work).collect(),
        Schedule::Parallel => (0..config.runs).into_par_iter().map(work).collect(),
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per_run {
        records.extend(r);
        failures.extend(f);
    }
    Ok(BatchOutcome {
        records,
        failures,
        run_seeds: (0..config.runs).map(|r| run_seed(config.master_seed, r)).collect(),
        dim,
        output_names,
    })
}

impl BatchOutcome {
    /// Error to report when every run failed.
    pub fn all_failed(&self) -> Option<AosError> {
        if !self.records.is_empty() || self.failures.is_empty() {
            return None;
        }
        let first = &self.failures[0];
        let message = format!("all runs failed; first failure: {}", first.message);
        Some(if self.failures.iter().all(|f| f.config) {
            AosError::Config(message)
        } else {
            AosError::Numerical(message)
        })
    }
}
