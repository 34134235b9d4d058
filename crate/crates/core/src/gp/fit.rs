//! Hyperparameter fitting by bounded multi-start maximization of the log
//! marginal likelihood.
//!
//! The search runs over log-hyperparameters mapped into their box by a
//! logistic transform, so the local optimizer itself is unconstrained.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lbfgs::{self, LbfgsOptions};
use super::{check_training_data, factor_with_jitter, GpHyperparams, GpModel};
use crate::error::{AosError, Result};
use crate::{math, rng};

/// Box constraints. Lengthscales are in (normalized) input units; the two
/// variances are multiples of the empirical target variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperparamBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for HyperparamBounds {
    fn default() -> Self {
        HyperparamBounds {
            lengthscale: (0.01, 10.0),
            signal_variance: (1e-4, 10.0),
            noise_variance: (1e-8, 1.0),
        }
    }
}

impl HyperparamBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("lengthscale", self.lengthscale),
            ("signal_variance", self.signal_variance),
            ("noise_variance", self.noise_variance),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(AosError::config(alloc::format!(
                    "{name} bounds must satisfy 0 < lower <= upper < inf"
                )));
            }
        }
        Ok(())
    }

    /// Log-space box `(lower, upper)` for `[log ℓ_1.., log σ_f², log σ_N²]`.
    fn log_box(&self, dim: usize, target_variance: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![math::ln(self.lengthscale.0); dim];
        let mut hi = vec![math::ln(self.lengthscale.1); dim];
        lo.push(math::ln(self.signal_variance.0 * target_variance));
        hi.push(math::ln(self.signal_variance.1 * target_variance));
        lo.push(math::ln(self.noise_variance.0 * target_variance));
        hi.push(math::ln(self.noise_variance.1 * target_variance));
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub bounds: HyperparamBounds,
    /// Number of local searches; the first starts at the box centre (or the
    /// warm start), the rest at seeded random points.
    pub restarts: usize,
    pub seed: u64,
    pub warm_start: Option<GpHyperparams>,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            bounds: HyperparamBounds::default(),
            restarts: 5,
            seed: 0,
            warm_start: None,
            max_iterations: 60,
        }
    }
}

fn target_variance(targets: &[f64]) -> f64 {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    if var.is_finite() && var > 1e-300 {
        var
    } else {
        1.0
    }
}

fn to_hyperparams(theta: &[f64]) -> GpHyperparams {
    let d = theta.len() - 2;
    GpHyperparams {
        lengthscales: theta[..d].iter().map(|t| math::exp(*t)).collect(),
        signal_variance: math::exp(theta[d]),
        noise_variance: math::exp(theta[d + 1]),
    }
}

struct Objective {
    n: usize,
    dim: usize,
    /// Per-dimension squared differences, row-major `n × n`.
    sq_diff: Vec<Vec<f64>>,
    centered: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Objective {
    fn new(inputs: &[Vec<f64>], targets: &[f64], lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let n = inputs.len();
        let dim = inputs[0].len();
        let mut sq_diff = vec![vec![0.0; n * n]; dim];
        for (k, m) in sq_diff.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..i {
                    let t = inputs[i][k] - inputs[j][k];
                    m[i * n + j] = t * t;
                    m[j * n + i] = t * t;
                }
            }
        }
        let mean = targets.iter().sum::<f64>() / n as f64;
        Objective {
            n,
            dim,
            sq_diff,
            centered: targets.iter().map(|y| y - mean).collect(),
            lo,
            hi,
        }
    }

    fn theta(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(u, (lo, hi))| lo + (hi - lo) * math::sigmoid(*u))
            .collect()
    }

    fn u_of(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (lo, hi))| {
                if hi > lo {
                    math::logit(((t - lo) / (hi - lo)).clamp(1e-6, 1.0 - 1e-6))
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Log marginal likelihood and its gradient in log-hyperparameters.
    fn eval_theta(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (n, d) = (self.n, self.dim);
        let inv_l2: Vec<f64> = theta[..d].iter().map(|t| math::exp(-2.0 * t)).collect();
        let sf2 = math::exp(theta[d]);
        let sn2 = math::exp(theta[d + 1]);

        let mut kf = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let mut r2 = 0.0;
                for k in 0..d {
                    r2 += self.sq_diff[k][i * n + j] * inv_l2[k];
                }
                let v = sf2 * math::exp(-0.5 * r2);
                kf[i * n + j] = v;
                kf[j * n + i] = v;
            }
            kf[i * n + i] = sf2;
        }
        let mut a = kf.clone();
        for i in 0..n {
            a[i * n + i] += sn2;
        }
        let (chol, _) = factor_with_jitter(&mut a, n, sf2)?;
        let alpha = chol.solve(&self.centered);
        let data_fit: f64 = self.centered.iter().zip(&alpha).map(|(y, a)| y * a).sum();
        let lml = -0.5 * data_fit - chol.log_det_half() - 0.5 * n as f64 * math::ln(2.0 * PI);
        if !lml.is_finite() {
            return None;
        }

        // dL/dθ = ½ Σ_ij (α_i α_j − K⁻¹_ij) ∂K_ij/∂θ
        let kinv = chol.inverse();
        let mut grad = vec![0.0; d + 2];
        let mut trace_w = 0.0;
        for i in 0..n {
            let w_ii = alpha[i] * alpha[i] - kinv[i * n + i];
            trace_w += w_ii;
            grad[d] += 0.5 * w_ii * sf2;
            for j in 0..i {
                // Off-diagonal terms appear twice by symmetry.
                let w = (alpha[i] * alpha[j] - kinv[i * n + j]) * kf[i * n + j];
                grad[d] += w;
                for k in 0..d {
                    grad[k] += w * self.sq_diff[k][i * n + j] * inv_l2[k];
                }
            }
        }
        grad[d + 1] = 0.5 * trace_w * sn2;
        Some((lml, grad))
    }

    /// Negative LML and gradient in the unconstrained coordinates.
    fn eval_u(&self, u: &[f64]) -> Option<(f64, Vec<f64>)> {
        let theta = self.theta(u);
        let (lml, g) = self.eval_theta(&theta)?;
        let grad = u
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .zip(&g)
            .map(|((u, (lo, hi)), g)| {
                let s = math::sigmoid(*u);
                -g * (hi - lo) * s * (1.0 - s)
            })
            .collect();
        Some((-lml, grad))
    }
}

/// Fits hyperparameters by maximizing the log marginal likelihood and
/// returns the conditioned model. Deterministic given `options.seed`.
///
/// With one or two training points the likelihood is too flat to be
/// informative, so the box centre is used without optimization.
pub fn fit(inputs: &[Vec<f64>], targets: &[f64], options: &FitOptions) -> Result<GpModel> {
    let dim = check_training_data(inputs, targets)?;
    options.bounds.validate()?;
    let var = target_variance(targets);
    let (lo, hi) = options.bounds.log_box(dim, var);
    let centre: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();

    if inputs.len() <= 2 || options.restarts == 0 {
        return GpModel::new(inputs.to_vec(), targets.to_vec(), to_hyperparams(&centre));
    }

    let objective = Objective::new(inputs, targets, lo, hi);
    let lbfgs_opts = LbfgsOptions {
        max_iterations: options.max_iterations,
        ..LbfgsOptions::default()
    };
    let first = match &options.warm_start {
        Some(hp) if hp.dim() == dim && hp.validate().is_ok() => {
            let mut theta: Vec<f64> = hp.lengthscales.iter().map(|l| math::ln(*l)).collect();
            theta.push(math::ln(hp.signal_variance));
            theta.push(math::ln(hp.noise_variance));
            objective.u_of(&theta)
        }
        _ => vec![0.0; dim + 2],
    };

    let mut rng = rng::rng_from_seed(options.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..options.restarts {
        let start = if restart == 0 {
            first.clone()
        } else {
            (0..dim + 2)
                .map(|_| math::logit(rng.gen_range(0.02..0.98)))
                .collect()
        };
        let (u, f) = lbfgs::minimize(|u| objective.eval_u(u), start, &lbfgs_opts);
        if f.is_finite() && best.as_ref().map_or(true, |(_, bf)| f < *bf) {
            best = Some((u, f));
        }
    }
    let theta = match best {
        Some((u, _)) => objective.theta(&u),
        None => centre,
    };
    GpModel::new(inputs.to_vec(), targets.to_vec(), to_hyperparams(&theta))
}

#[cfg(test)]
pub(super) fn objective_gradient_check(inputs: &[Vec<f64>], targets: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = inputs[0].len();
    let obj = Objective::new(inputs, targets, vec![-10.0; d + 2], vec![10.0; d + 2]);
    let (_, g) = obj.eval_theta(theta).unwrap();
    let h = 1e-6;
    let fd = (0..theta.len())
        .map(|k| {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[k] += h;
            tm[k] -= h;
            (obj.eval_theta(&tp).unwrap().0 - obj.eval_theta(&tm).unwrap().0) / (2.0 * h)
        })
        .collect();
    (g, fd)
}
