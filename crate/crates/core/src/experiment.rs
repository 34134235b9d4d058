//! Single-run driver and learning-curve aggregation.
//!
//! A run fixes everything random that a strategy does not choose: the
//! candidate set, the initial design and the measurement noise. Replaying
//! the same [`RunProblem`] with different strategies therefore compares
//! them on identical terms.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{AosError, Result};
use crate::gp::{fit, FitOptions, GpModel, HyperparamBounds};
use crate::jura::{make_split, JuraSplit, JuraTable};
use crate::math;
use crate::metrics::{self, min_max, nrmse_val, ErrorReport};
use crate::processes::{generate_suite, validation_grid, ProcessSuite, SetupSpec};
use crate::rng::{self, tag};
use crate::strategies::{StrategyConfig, StrategyKind, StrategyState};

/// Purpose tag for hyperparameter fits inside cross-validation.
const CV_FIT: u64 = 0x4356_4654;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub p_init: usize,
    pub p_max: usize,
    pub folds: usize,
    pub filter_window: usize,
    /// Size of the synthetic candidate set (ignored on pool problems).
    pub candidates: usize,
    /// Restarts of the full-data hyperparameter fit.
    pub restarts: usize,
    /// Restarts of each fold refit; the first start is the full-data
    /// optimum.
    pub cv_restarts: usize,
    pub max_iterations: usize,
    pub bounds: HyperparamBounds,
    pub weights: Option<Vec<f64>>,
    pub sq_order: Option<Vec<usize>>,
    pub quality_target: Option<f64>,
    /// Points per axis of the synthetic validation grid.
    pub validation_points_per_axis: usize,
    /// When set, synthetic truth functions are drawn once from this seed
    /// and shared by all runs; otherwise every run draws its own.
    pub function_seed: Option<u64>,
    pub validation_fraction: f64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            p_init: 10,
            p_max: 100,
            folds: 10,
            filter_window: 3,
            candidates: 1000,
            restarts: 5,
            cv_restarts: 1,
            max_iterations: 60,
            bounds: HyperparamBounds::default(),
            weights: None,
            sq_order: None,
            quality_target: None,
            validation_points_per_axis: 11,
            function_seed: None,
            validation_fraction: 0.25,
        }
    }
}

impl ExperimentSettings {
    pub fn validate(&self) -> Result<()> {
        if self.p_init < 1 || self.p_init >= self.p_max {
            return Err(AosError::config("need 1 ≤ p_init < p_max"));
        }
        if self.folds < 2 {
            return Err(AosError::config("need at least 2 folds"));
        }
        if self.filter_window < 1 {
            return Err(AosError::config("filter window must be at least 1"));
        }
        if self.restarts < 1 {
            return Err(AosError::config("need at least one fit restart"));
        }
        if self.validation_points_per_axis < 2 {
            return Err(AosError::config("validation grid needs at least 2 points per axis"));
        }
        self.bounds.validate()
    }

    pub fn strategy_config(&self) -> StrategyConfig {
        StrategyConfig {
            p_init: self.p_init,
            p_max: self.p_max,
            filter_window: self.filter_window,
            weights: self.weights.clone(),
            sq_order: self.sq_order.clone(),
            quality_target: self.quality_target,
        }
    }
}

/// Seed of run `run` under `master_seed`.
pub fn run_seed(master_seed: u64, run: usize) -> u64 {
    rng::derive_seed(&[master_seed, tag::RUN, run as u64])
}

/// Where measurements come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Oracle {
    Process(ProcessSuite),
    Pool(JuraSplit),
}

/// Everything about one run that is shared by all strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct RunProblem {
    pub run_seed: u64,
    pub dim: usize,
    pub output_names: Vec<String>,
    pub candidates: Vec<Vec<f64>>,
    pub initial_design: Vec<Vec<f64>>,
    /// Candidates already used by the initial design.
    pub initial_candidates: Vec<usize>,
    pub validation_inputs: Vec<Vec<f64>>,
    /// `validation_truth[m]` holds output `m` at every validation input.
    pub validation_truth: Vec<Vec<f64>>,
    /// Fixed NRMSE range per output; `None` normalizes by the range of the
    /// measurements taken so far.
    pub ranges: Option<Vec<(f64, f64)>>,
    pub oracle: Oracle,
}

impl RunProblem {
    /// Synthetic run: seeded random initial design, shifted Halton
    /// candidates, validation on a regular grid, range taken from the
    /// noise-free truth.
    pub fn synthetic(setup: &SetupSpec, settings: &ExperimentSettings, run_seed: u64) -> Result<Self> {
        settings.validate()?;
        let mut suite = generate_suite(setup, settings.function_seed.unwrap_or(run_seed))?;
        suite.run_seed = run_seed;
        let dim = setup.dim;
        let validation_inputs = validation_grid(dim, settings.validation_points_per_axis);
        let validation_truth = (0..suite.outputs())
            .map(|m| validation_inputs.iter().map(|x| suite.truth(m, x)).collect())
            .collect();
        Ok(RunProblem {
            run_seed,
            dim,
            output_names: (0..suite.outputs()).map(|m| alloc::format!("y{}", m + 1)).collect(),
            candidates: rng::shifted_halton(dim, settings.candidates, rng::derive_seed(&[run_seed, tag::CANDIDATES])),
            initial_design: rng::uniform_points(dim, settings.p_init, rng::derive_seed(&[run_seed, tag::INITIAL_DESIGN])),
            initial_candidates: Vec::new(),
            validation_inputs,
            validation_truth,
            ranges: Some(suite.true_range.clone()),
            oracle: Oracle::Process(suite),
        })
    }

    /// Pool run on the Jura table: candidates are the pool locations and the
    /// initial design is a seeded random subset of them.
    pub fn jura(table: &JuraTable, metals: &[&str], settings: &ExperimentSettings, run_seed: u64) -> Result<Self> {
        settings.validate()?;
        let split = make_split(table, metals, rng::derive_seed(&[run_seed, tag::SPLIT]), settings.validation_fraction)?;
        let pool = split.pool_locations.len();
        if settings.p_max > pool {
            return Err(AosError::config(alloc::format!("p_max {} exceeds the {pool} pool samples", settings.p_max)));
        }
        let mut order: Vec<usize> = (0..pool).collect();
        order.shuffle(&mut rng::rng_from_seed(rng::derive_seed(&[run_seed, tag::INITIAL_DESIGN])));
        let initial_candidates = order[..settings.p_init].to_vec();
        Ok(RunProblem {
            run_seed,
            dim: 2,
            output_names: split.metals.clone(),
            candidates: split.pool_locations.clone(),
            initial_design: initial_candidates.iter().map(|&i| split.pool_locations[i].clone()).collect(),
            initial_candidates,
            validation_inputs: split.validation_locations.clone(),
            validation_truth: (0..split.outputs()).map(|k| split.validation_column(k)).collect(),
            ranges: None,
            oracle: Oracle::Pool(split),
        })
    }

    pub fn outputs(&self) -> usize {
        self.output_names.len()
    }

    /// Measures all outputs at `x` as the `draw_index`-th measurement.
    pub fn measure(&self, x: &[f64], draw_index: u64) -> Result<Vec<f64>> {
        match &self.oracle {
            Oracle::Process(suite) => Ok(suite.measure(x, draw_index)),
            Oracle::Pool(split) => split.pool_measure(x),
        }
    }

    /// Seeds of the per-output noise streams (empty for pool problems).
    pub fn noise_keys(&self) -> Vec<u64> {
        match &self.oracle {
            Oracle::Process(suite) => (0..suite.outputs())
                .map(|m| rng::derive_seed(&[suite.run_seed, tag::NOISE, m as u64]))
                .collect(),
            Oracle::Pool(_) => Vec::new(),
        }
    }
}

/// State after `n_meas` measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub n_meas: usize,
    pub leader: Option<usize>,
    /// Next query chosen from this state; `None` on the final entry.
    pub query: Option<Vec<f64>>,
    pub nrmse: Vec<f64>,
    pub nrmse_sum: f64,
    /// Raw CV errors of this iteration (empty when not computed).
    pub cv_raw: Vec<f64>,
    /// Filtered CV errors used for leader selection (empty when not computed).
    pub cv_filtered: Vec<f64>,
    pub finished: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub strategy: StrategyKind,
    pub run_seed: u64,
    pub noise_keys: Vec<u64>,
    pub initial_design: Vec<Vec<f64>>,
    pub initial_values: Vec<Vec<f64>>,
    pub entries: Vec<RunEntry>,
}

impl RunRecord {
    pub fn n_axis(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.n_meas).collect()
    }

    pub fn curve(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.nrmse_sum).collect()
    }
}

fn fit_all(xs: &[Vec<f64>], ys: &[Vec<f64>], settings: &ExperimentSettings, run_seed: u64) -> Result<Vec<GpModel>> {
    let n = xs.len();
    ys.iter()
        .enumerate()
        .map(|(m, y)| {
            let options = FitOptions {
                bounds: settings.bounds.clone(),
                restarts: settings.restarts,
                seed: rng::derive_seed(&[run_seed, tag::FIT, n as u64, m as u64]),
                warm_start: None,
                max_iterations: settings.max_iterations,
            };
            fit(xs, y, &options).map_err(|e| AosError::numerical(alloc::format!("fit of output {m} at n = {n}: {e}")))
        })
        .collect()
}

fn cv_errors(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    models: &[GpModel],
    settings: &ExperimentSettings,
    run_seed: u64,
    iteration: usize,
) -> Result<Vec<f64>> {
    ys.iter()
        .enumerate()
        .map(|(m, y)| {
            let options = FitOptions {
                bounds: settings.bounds.clone(),
                restarts: settings.cv_restarts,
                seed: rng::derive_seed(&[run_seed, CV_FIT, iteration as u64, m as u64]),
                warm_start: Some(models[m].hyperparams().clone()),
                max_iterations: settings.max_iterations,
            };
            let fold_seed = rng::derive_seed(&[run_seed, tag::FOLDS, iteration as u64, m as u64]);
            Ok(metrics::cv_error(xs, y, settings.folds, fold_seed, &options)?.value)
        })
        .collect()
}

fn validation_errors(problem: &RunProblem, models: &[GpModel], ys: &[Vec<f64>]) -> Result<Vec<f64>> {
    models
        .iter()
        .enumerate()
        .map(|(m, model)| {
            let preds: Vec<f64> = problem.validation_inputs.iter().map(|x| model.predict_mean(x)).collect();
            let range = match &problem.ranges {
                Some(r) => r[m],
                None => min_max(&ys[m]),
            };
            Ok(nrmse_val(&problem.validation_truth[m], &preds, range)?.value)
        })
        .collect()
}

/// Runs one strategy on one problem until `p_max` measurements or until all
/// outputs reach the quality target.
pub fn run_single(problem: &RunProblem, kind: StrategyKind, settings: &ExperimentSettings, run: usize) -> Result<RunRecord> {
    settings.validate()?;
    let outputs = problem.outputs();
    let mut state = StrategyState::new(kind, outputs, &settings.strategy_config())?;
    let track_cv = kind == StrategyKind::Cvh || settings.quality_target.is_some();

    let mut xs: Vec<Vec<f64>> = problem.initial_design.clone();
    let mut ys: Vec<Vec<f64>> = vec![Vec::with_capacity(settings.p_max); outputs];
    let mut initial_values = Vec::with_capacity(xs.len());
    for (i, x) in xs.iter().enumerate() {
        let v = problem.measure(x, i as u64)?;
        for (m, y) in v.iter().enumerate() {
            ys[m].push(*y);
        }
        initial_values.push(v);
    }
    let mut used = vec![false; problem.candidates.len()];
    for &i in &problem.initial_candidates {
        used[i] = true;
    }

    let mut entries = Vec::with_capacity(settings.p_max - settings.p_init + 1);
    for n in settings.p_init..=settings.p_max {
        let models = fit_all(&xs, &ys, settings, problem.run_seed)?;
        let nrmse = validation_errors(problem, &models, &ys)?;
        let (cv_raw, cv_filtered) = if track_cv {
            let raw = cv_errors(&xs, &ys, &models, settings, problem.run_seed, n)?;
            state = state.cvh_update(&raw)?;
            (raw, state.cvh_filtered.clone())
        } else {
            (Vec::new(), Vec::new())
        };
        let report = ErrorReport::new(nrmse);
        let mut entry = RunEntry {
            n_meas: n,
            leader: None,
            query: None,
            nrmse: report.per_output,
            nrmse_sum: report.aggregate,
            cv_raw,
            cv_filtered,
            finished: state.finished_outputs.iter().copied().collect(),
        };
        if n == settings.p_max {
            entries.push(entry);
            break;
        }
        let available: Vec<usize> = (0..problem.candidates.len()).filter(|&i| !used[i]).collect();
        if available.is_empty() {
            entries.push(entry);
            break;
        }
        let refs: Vec<&Vec<f64>> = available.iter().map(|&i| &problem.candidates[i]).collect();
        let (proposal, next) = state.step(&models, &xs, &refs)?;
        state = next;
        let Some(proposal) = proposal else {
            entries.push(entry);
            break;
        };
        let chosen = available[proposal.candidate_index];
        used[chosen] = true;
        let x = problem.candidates[chosen].clone();
        let v = problem.measure(&x, n as u64)?;
        for (m, y) in v.into_iter().enumerate() {
            ys[m].push(y);
        }
        entry.leader = proposal.leader;
        entry.query = Some(x.clone());
        xs.push(x);
        entries.push(entry);
    }
    Ok(RunRecord {
        run,
        strategy: kind,
        run_seed: problem.run_seed,
        noise_keys: problem.noise_keys(),
        initial_design: problem.initial_design.clone(),
        initial_values,
        entries,
    })
}

/// Mean and population standard deviation of one strategy's curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyCurve {
    pub strategy: StrategyKind,
    pub runs: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub n_meas: Vec<usize>,
    pub curves: Vec<StrategyCurve>,
}

impl CurveSummary {
    pub fn curve(&self, kind: StrategyKind) -> Option<&StrategyCurve> {
        self.curves.iter().find(|c| c.strategy == kind)
    }

    pub fn p_max(&self) -> usize {
        *self.n_meas.last().expect("summary axis is non-empty")
    }

    pub fn p_init(&self) -> usize {
        self.n_meas[0]
    }
}

/// Pointwise mean and population standard deviation across runs, per
/// strategy. Strategies appear in their canonical order.
pub fn aggregate(records: &[RunRecord]) -> Result<CurveSummary> {
    let first = records.first().ok_or_else(|| AosError::input("no records to aggregate"))?;
    let axis = first.n_axis();
    if axis.is_empty() {
        return Err(AosError::input("record has no entries"));
    }
    let mut groups: BTreeMap<usize, (StrategyKind, Vec<Vec<f64>>)> = BTreeMap::new();
    for r in records {
        if r.n_axis() != axis {
            return Err(AosError::input(alloc::format!(
                "record of run {} ({}) does not share the n_meas axis",
                r.run,
                r.strategy
            )));
        }
        let key = StrategyKind::ALL.iter().position(|k| *k == r.strategy).expect("known strategy");
        groups.entry(key).or_insert_with(|| (r.strategy, Vec::new())).1.push(r.curve());
    }
    let curves = groups
        .into_values()
        .map(|(strategy, runs)| {
            let count = runs.len() as f64;
            let mean: Vec<f64> = (0..axis.len()).map(|i| runs.iter().map(|c| c[i]).sum::<f64>() / count).collect();
            let std = (0..axis.len())
                .map(|i| math::sqrt(runs.iter().map(|c| (c[i] - mean[i]) * (c[i] - mean[i])).sum::<f64>() / count))
                .collect();
            StrategyCurve {
                strategy,
                runs: runs.len(),
                mean,
                std,
            }
        })
        .collect();
    Ok(CurveSummary { n_meas: axis, curves })
}

/// Measurements the target strategy needs to match the reference's final
/// mean error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    /// First `n_meas` where the target mean is at or below the reference's
    /// value at `p_max`; `None` when it never gets there.
    pub n: Option<usize>,
    /// `(p_max − n) / (p_max − p_init)`, as a fraction.
    pub fraction: Option<f64>,
}

pub fn compare_savings(summary: &CurveSummary, reference: StrategyKind, target: StrategyKind) -> Result<Savings> {
    let missing = |k: StrategyKind| AosError::input(alloc::format!("strategy {k} is not in the summary"));
    let r = summary.curve(reference).ok_or_else(|| missing(reference))?;
    let t = summary.curve(target).ok_or_else(|| missing(target))?;
    let end = *r.mean.last().expect("non-empty curve");
    let n = summary.n_meas.iter().zip(&t.mean).find(|(_, &v)| v <= end).map(|(&n, _)| n);
    let (p_init, p_max) = (summary.p_init() as f64, summary.p_max() as f64);
    Ok(Savings {
        n,
        fraction: n.map(|n| (p_max - n as f64) / (p_max - p_init)),
    })
}
