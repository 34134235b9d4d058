//! Single-output Gaussian-process regression with an anisotropic
//! squared-exponential kernel and a constant (training-mean) prior mean.

mod fit;
mod lbfgs;

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{AosError, Result};
use crate::linalg::Cholesky;
use crate::math;

pub use fit::{fit, FitOptions, HyperparamBounds};

/// Jitter levels, relative to the signal variance, tried in order when the
/// covariance matrix fails to factorize.
const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(AosError::input("at least one lengthscale is required"));
        }
        if !self.lengthscales.iter().all(|l| *l > 0.0 && l.is_finite()) {
            return Err(AosError::input("lengthscales must be positive and finite"));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(AosError::input("signal variance must be positive and finite"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(AosError::input("noise variance must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// `σ_f² · exp(−½ Σ_j ((a_j − b_j) / ℓ_j)²)`.
pub fn kernel(x1: &[f64], x2: &[f64], hp: &GpHyperparams) -> Result<f64> {
    if x1.len() != x2.len() || x1.len() != hp.dim() {
        return Err(AosError::input("kernel arguments and lengthscales must share one dimension"));
    }
    Ok(kernel_unchecked(x1, x2, &hp.lengthscales, hp.signal_variance))
}

#[inline]
pub(crate) fn kernel_unchecked(x1: &[f64], x2: &[f64], lengthscales: &[f64], signal_variance: f64) -> f64 {
    let mut r2 = 0.0;
    for ((a, b), l) in x1.iter().zip(x2).zip(lengthscales) {
        let t = (a - b) / l;
        r2 += t * t;
    }
    signal_variance * math::exp(-0.5 * r2)
}

/// A fitted GP. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyperparams: GpHyperparams,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    target_mean: f64,
    factor: Cholesky,
    alpha: Vec<f64>,
    jitter: f64,
}

pub(crate) fn check_training_data(inputs: &[Vec<f64>], targets: &[f64]) -> Result<usize> {
    if inputs.is_empty() {
        return Err(AosError::input("a GP needs at least one training point"));
    }
    if inputs.len() != targets.len() {
        return Err(AosError::input("number of training inputs and targets differ"));
    }
    let d = inputs[0].len();
    if d == 0 || inputs.iter().any(|x| x.len() != d) {
        return Err(AosError::input("training inputs must share one non-zero dimension"));
    }
    if inputs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AosError::input("training inputs must be finite"));
    }
    if let Some(i) = targets.iter().position(|v| !v.is_finite()) {
        return Err(AosError::input(alloc::format!("training target {i} is not finite")));
    }
    Ok(d)
}

/// Builds `K + σ_N² I` (row-major) for the given inputs.
fn covariance_matrix(inputs: &[Vec<f64>], hp: &GpHyperparams) -> Vec<f64> {
    let n = inputs.len();
    let mut k = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = kernel_unchecked(&inputs[i], &inputs[j], &hp.lengthscales, hp.signal_variance);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] = hp.signal_variance + hp.noise_variance;
    }
    k
}

/// Cholesky with escalating diagonal jitter. Returns the factor and the
/// absolute jitter that was added.
pub(crate) fn factor_with_jitter(k: &mut [f64], n: usize, signal_variance: f64) -> Option<(Cholesky, f64)> {
    let mut added = 0.0;
    for rel in JITTER_LADDER {
        let target = rel * signal_variance;
        let delta = target - added;
        if delta != 0.0 {
            for i in 0..n {
                k[i * n + i] += delta;
            }
            added = target;
        }
        if let Some(c) = Cholesky::factor(k, n) {
            return Some((c, added));
        }
    }
    None
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on the training data.
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, hyperparams: GpHyperparams) -> Result<Self> {
        let d = check_training_data(&inputs, &targets)?;
        hyperparams.validate()?;
        if hyperparams.dim() != d {
            return Err(AosError::input("lengthscale count differs from input dimension"));
        }
        let n = inputs.len();
        let target_mean = targets.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = targets.iter().map(|y| y - target_mean).collect();
        let mut k = covariance_matrix(&inputs, &hyperparams);
        let (factor, jitter) = factor_with_jitter(&mut k, n, hyperparams.signal_variance)
            .ok_or_else(|| AosError::numerical("covariance matrix is not positive definite even with jitter"))?;
        let alpha = factor.solve(&centered);
        Ok(GpModel {
            hyperparams,
            inputs,
            targets,
            target_mean,
            factor,
            alpha,
            jitter,
        })
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyperparams
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.hyperparams.dim()
    }

    /// Prior mean added back to every prediction (the training-target mean).
    pub fn prior_mean(&self) -> f64 {
        self.target_mean
    }

    /// Diagonal jitter that had to be added to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Row-major lower-triangular factor of `K + σ_N² I`.
    pub fn factor(&self) -> &[f64] {
        &self.factor.l
    }

    /// `(K + σ_N² I)⁻¹ (y − ȳ)`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let centered = self.targets.iter().map(|y| y - self.target_mean);
        let fit: f64 = centered.zip(&self.alpha).map(|(y, a)| y * a).sum();
        -0.5 * fit - self.factor.log_det_half() - 0.5 * self.len() as f64 * math::ln(2.0 * PI)
    }

    fn cross_covariance(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "test point has the wrong dimension");
        let hp = &self.hyperparams;
        self.inputs
            .iter()
            .map(|xi| kernel_unchecked(xi, x, &hp.lengthscales, hp.signal_variance))
            .collect()
    }

    /// Posterior mean and latent variance at `x`.
    ///
    /// Panics if `x` has the wrong dimension. Points outside the unit cube
    /// are accepted.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let mut k = self.cross_covariance(x);
        let mean = self.target_mean + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        self.factor.forward(&mut k);
        let reduction: f64 = k.iter().map(|v| v * v).sum();
        let variance = (self.hyperparams.signal_variance - reduction).max(0.0);
        Prediction { mean, variance }
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        let k = self.cross_covariance(x);
        self.target_mean + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict_variance(&self, x: &[f64]) -> f64 {
        let mut k = self.cross_covariance(x);
        self.factor.forward(&mut k);
        let reduction: f64 = k.iter().map(|v| v * v).sum();
        (self.hyperparams.signal_variance - reduction).max(0.0)
    }
}

#[cfg(test)]
mod tests;
