//! Active output selection strategies.
//!
//! * **SQ** – outputs lead one after another, each for a fixed share of the
//!   measurement budget.
//! * **RR** – leadership rotates after every measurement.
//! * **G** – no leader; the query maximizes the weighted sum of all
//!   predictive variances.
//! * **CVH** – the output with the highest moving-average cross-validation
//!   error leads.
//! * **SF** – passive baseline; the query maximizes the minimum Euclidean
//!   distance to the points measured so far.
//!
//! SQ, RR and CVH place the query where the leader's predictive variance is
//! largest. Every argmax breaks ties towards the lowest index.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AosError, Result};
use crate::gp::GpModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "SQ")]
    Sq,
    #[serde(rename = "RR")]
    Rr,
    #[serde(rename = "G")]
    G,
    #[serde(rename = "CVH")]
    Cvh,
    #[serde(rename = "SF")]
    Sf,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Sq,
        StrategyKind::Rr,
        StrategyKind::G,
        StrategyKind::Cvh,
        StrategyKind::Sf,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            StrategyKind::Sq => "SQ",
            StrategyKind::Rr => "RR",
            StrategyKind::G => "G",
            StrategyKind::Cvh => "CVH",
            StrategyKind::Sf => "SF",
        }
    }

    /// Whether the strategy needs fitted output models to propose a query.
    pub fn uses_models(self) -> bool {
        self != StrategyKind::Sf
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for StrategyKind {
    type Err = AosError;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| AosError::config(alloc::format!("unknown strategy '{s}'")))
    }
}

/// Per-output budget of the sequential strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SqBudget {
    pub per_model: usize,
    /// Extra points given to the last output in leading order.
    pub remainder: usize,
}

pub fn sq_budget(p_max: usize, p_init: usize, outputs: usize) -> Result<SqBudget> {
    if p_max <= p_init {
        return Err(AosError::config("p_max must exceed p_init"));
    }
    if outputs == 0 {
        return Err(AosError::config("at least one output is required"));
    }
    let total = p_max - p_init;
    Ok(SqBudget {
        per_model: total / outputs,
        remainder: total % outputs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryProposal {
    /// Position of the query in the candidate slice it was chosen from.
    pub candidate_index: usize,
    pub x_star: Vec<f64>,
    pub leader: Option<usize>,
    pub score: f64,
}

fn argmax<C: AsRef<[f64]>>(candidates: &[C], mut score: impl FnMut(&[f64]) -> f64) -> Result<(usize, f64)> {
    if candidates.is_empty() {
        return Err(AosError::input("candidate set is empty"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let s = score(c.as_ref());
        let s = if s.is_nan() { f64::NEG_INFINITY } else { s };
        if i == 0 || s > best.1 {
            best = (i, s);
        }
    }
    Ok(best)
}

fn proposal<C: AsRef<[f64]>>(candidates: &[C], (index, score): (usize, f64), leader: Option<usize>) -> QueryProposal {
    QueryProposal {
        candidate_index: index,
        x_star: candidates[index].as_ref().to_vec(),
        leader,
        score,
    }
}

/// The candidate with the largest predictive variance under `model`.
pub fn propose_max_variance<C: AsRef<[f64]>>(model: &GpModel, candidates: &[C]) -> Result<QueryProposal> {
    check_dims(model.dim(), candidates)?;
    let best = argmax(candidates, |x| model.predict_variance(x))?;
    Ok(proposal(candidates, best, None))
}

/// The candidate maximizing `Σ_m w_m σ̂²_m(x)`.
pub fn propose_global<C: AsRef<[f64]>>(models: &[GpModel], weights: &[f64], candidates: &[C]) -> Result<QueryProposal> {
    if models.is_empty() || models.len() != weights.len() {
        return Err(AosError::input("need one weight per model and at least one model"));
    }
    if !weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
        return Err(AosError::input("weights must be positive"));
    }
    check_dims(models[0].dim(), candidates)?;
    let best = argmax(candidates, |x| {
        models
            .iter()
            .zip(weights)
            .fold(0.0, |acc, (m, w)| acc + w * m.predict_variance(x))
    })?;
    Ok(proposal(candidates, best, None))
}

/// The candidate farthest (in minimum Euclidean distance) from the
/// measured set. For inputs scaled to the unit cube this is the maximin
/// Mahalanobis criterion with identity covariance.
pub fn propose_space_filling<M: AsRef<[f64]>, C: AsRef<[f64]>>(measured: &[M], candidates: &[C]) -> Result<QueryProposal> {
    if measured.is_empty() {
        return Err(AosError::input("space filling needs at least one measured point"));
    }
    let dim = measured[0].as_ref().len();
    check_dims(dim, candidates)?;
    let (index, sq) = argmax(candidates, |c| {
        measured
            .iter()
            .map(|m| m.as_ref().iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    })?;
    Ok(proposal(candidates, (index, crate::math::sqrt(sq)), None))
}

fn check_dims<C: AsRef<[f64]>>(dim: usize, candidates: &[C]) -> Result<()> {
    if candidates.iter().any(|c| c.as_ref().len() != dim) {
        return Err(AosError::input("candidate dimension differs from the model input dimension"));
    }
    Ok(())
}

/// Settings shared by all strategy kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub p_init: usize,
    pub p_max: usize,
    /// Moving-average window of the CVH error filter.
    pub filter_window: usize,
    /// G weights; `None` means all ones.
    pub weights: Option<Vec<f64>>,
    /// SQ leading order; `None` means `0..M`.
    pub sq_order: Option<Vec<usize>>,
    /// Outputs whose filtered CV error drops to this value stop leading.
    pub quality_target: Option<f64>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            p_init: 10,
            p_max: 100,
            filter_window: 3,
            weights: None,
            sq_order: None,
            quality_target: None,
        }
    }
}

/// Outcome of leader selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leadership {
    Lead(usize),
    /// G and SF: the query is not owned by one output.
    Unled,
    /// Every output has reached its quality target or budget.
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyState {
    pub kind: StrategyKind,
    pub outputs: usize,
    pub leader: Option<usize>,
    pub iteration: usize,
    pub sq_budget_per_model: usize,
    pub sq_order: Vec<usize>,
    /// Points each output may lead under SQ, including transfers from
    /// outputs that finished early.
    pub sq_allotment: Vec<usize>,
    pub sq_points_spent: Vec<usize>,
    pub rr_cursor: usize,
    pub cvh_error_history: Vec<Vec<f64>>,
    pub cvh_filtered: Vec<f64>,
    pub filter_window: usize,
    pub weights: Vec<f64>,
    pub quality_target: Option<f64>,
    pub finished_outputs: BTreeSet<usize>,
}

impl StrategyState {
    pub fn new(kind: StrategyKind, outputs: usize, config: &StrategyConfig) -> Result<Self> {
        let budget = sq_budget(config.p_max, config.p_init, outputs)?;
        if config.filter_window == 0 {
            return Err(AosError::config("filter window must be at least 1"));
        }
        let weights = config.weights.clone().unwrap_or_else(|| vec![1.0; outputs]);
        if weights.len() != outputs || !weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
            return Err(AosError::config("need one positive weight per output"));
        }
        let sq_order = config.sq_order.clone().unwrap_or_else(|| (0..outputs).collect());
        let mut sorted = sq_order.clone();
        sorted.sort_unstable();
        if sorted != (0..outputs).collect::<Vec<_>>() {
            return Err(AosError::config("SQ order must be a permutation of the outputs"));
        }
        let mut sq_allotment = vec![budget.per_model; outputs];
        sq_allotment[*sq_order.last().expect("outputs > 0")] += budget.remainder;
        Ok(StrategyState {
            kind,
            outputs,
            leader: None,
            iteration: 0,
            sq_budget_per_model: budget.per_model,
            sq_order,
            sq_allotment,
            sq_points_spent: vec![0; outputs],
            rr_cursor: 0,
            cvh_error_history: vec![Vec::new(); outputs],
            cvh_filtered: vec![0.0; outputs],
            filter_window: config.filter_window,
            weights,
            quality_target: config.quality_target,
            finished_outputs: BTreeSet::new(),
        })
    }

    fn unfinished(&self, m: usize) -> bool {
        !self.finished_outputs.contains(&m)
    }

    pub fn select_leader(&self) -> Leadership {
        if (0..self.outputs).all(|m| !self.unfinished(m)) {
            return Leadership::Complete;
        }
        match self.kind {
            StrategyKind::G | StrategyKind::Sf => Leadership::Unled,
            StrategyKind::Sq => self
                .sq_order
                .iter()
                .copied()
                .find(|&m| self.unfinished(m) && self.sq_points_spent[m] < self.sq_allotment[m])
                .map_or(Leadership::Complete, Leadership::Lead),
            StrategyKind::Rr => (0..self.outputs)
                .map(|k| (self.rr_cursor + k) % self.outputs)
                .find(|&m| self.unfinished(m))
                .map_or(Leadership::Complete, Leadership::Lead),
            StrategyKind::Cvh => {
                let mut best: Option<usize> = None;
                for m in (0..self.outputs).filter(|&m| self.unfinished(m)) {
                    if best.map_or(true, |b| self.cvh_filtered[m] > self.cvh_filtered[b]) {
                        best = Some(m);
                    }
                }
                best.map_or(Leadership::Complete, Leadership::Lead)
            }
        }
    }

    /// Appends one CV error per output and refreshes the causal moving
    /// average over the last `filter_window` entries.
    pub fn cvh_update(mut self, cv_errors: &[f64]) -> Result<Self> {
        if cv_errors.len() != self.outputs {
            return Err(AosError::input("need one cross-validation error per output"));
        }
        if let Some((output, &value)) = cv_errors.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(AosError::NonFiniteCvError { output, value });
        }
        for (m, &e) in cv_errors.iter().enumerate() {
            let history = &mut self.cvh_error_history[m];
            history.push(e);
            self.cvh_filtered[m] = moving_average(history, self.filter_window);
        }
        if let Some(target) = self.quality_target {
            for m in 0..self.outputs {
                if self.unfinished(m) && self.cvh_filtered[m] <= target {
                    self.mark_finished(m);
                }
            }
        }
        Ok(self)
    }

    /// Removes `m` from leadership. Under SQ its unused budget passes to the
    /// next unfinished output in leading order.
    pub fn mark_finished(&mut self, m: usize) {
        if !self.finished_outputs.insert(m) {
            return;
        }
        let leftover = self.sq_allotment[m].saturating_sub(self.sq_points_spent[m]);
        self.sq_allotment[m] -= leftover;
        let pos = self.sq_order.iter().position(|&o| o == m).expect("output in order");
        let next = self.sq_order[pos + 1..]
            .iter()
            .chain(&self.sq_order[..pos])
            .copied()
            .find(|&o| self.unfinished(o));
        if let Some(next) = next {
            self.sq_allotment[next] += leftover;
        }
    }

    /// Chooses the next query. Returns `None` for the proposal once every
    /// output is finished. `models` may be empty for SF.
    pub fn step<M: AsRef<[f64]>, C: AsRef<[f64]>>(
        mut self,
        models: &[GpModel],
        measured: &[M],
        candidates: &[C],
    ) -> Result<(Option<QueryProposal>, Self)> {
        if self.kind.uses_models() && models.len() != self.outputs {
            return Err(AosError::input("need one fitted model per output"));
        }
        let proposal = match self.select_leader() {
            Leadership::Complete => {
                self.leader = None;
                return Ok((None, self));
            }
            Leadership::Unled => match self.kind {
                StrategyKind::G => propose_global(models, &self.weights, candidates)?,
                _ => propose_space_filling(measured, candidates)?,
            },
            Leadership::Lead(m) => {
                let mut p = propose_max_variance(&models[m], candidates)?;
                p.leader = Some(m);
                match self.kind {
                    StrategyKind::Sq => self.sq_points_spent[m] += 1,
                    StrategyKind::Rr => self.rr_cursor = (m + 1) % self.outputs,
                    _ => {}
                }
                p
            }
        };
        self.leader = proposal.leader;
        self.iteration += 1;
        Ok((Some(proposal), self))
    }
}

/// Mean of the last `window` entries (fewer if the history is shorter).
pub fn moving_average(history: &[f64], window: usize) -> f64 {
    let tail = &history[history.len().saturating_sub(window)..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

pub fn parse_strategy_list(list: &str) -> Result<Vec<StrategyKind>> {
    let kinds: Vec<StrategyKind> = list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if kinds.is_empty() {
        return Err(AosError::config(String::from("strategy list is empty")));
    }
    Ok(kinds)
}
