//! Error measures: K-fold cross-validation error of one output model and
//! range-normalized validation RMSE with its Euclidean aggregate.
//!
//! Both errors are the root of the *mean* squared residual divided by the
//! output range, i.e. the conventional dimensionless NRMSE.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{AosError, Result};
use crate::gp::{fit, FitOptions, GpHyperparams, GpModel};
use crate::{math, rng};

/// Map from training index to fold, `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    folds: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    pub fn new(folds: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(AosError::input("cross-validation needs at least two folds"));
        }
        if folds.iter().any(|&f| f >= k) {
            return Err(AosError::input("fold label out of range"));
        }
        Ok(FoldAssignment { folds, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    pub fn fold_of(&self, index: usize) -> usize {
        self.folds[index]
    }

    pub fn labels(&self) -> &[usize] {
        &self.folds
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Random balanced partition of `n` indices into `k` folds. When `n < k`
/// the fold count drops to `n` (leave-one-out).
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if n < 2 {
        return Err(AosError::input("cross-validation needs at least two samples"));
    }
    if k < 2 {
        return Err(AosError::input("cross-validation needs at least two folds"));
    }
    let k = k.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_from_seed(seed));
    let mut folds = alloc::vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    FoldAssignment::new(folds, k)
}

/// An error value together with whether the normalizing range was zero,
/// in which case `value` is the plain RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedError {
    pub value: f64,
    pub degenerate_range: bool,
}

fn normalize(sum_sq: f64, count: usize, range: f64) -> NormalizedError {
    let rmse = math::sqrt(sum_sq / count as f64);
    if range > 0.0 {
        NormalizedError {
            value: rmse / range,
            degenerate_range: false,
        }
    } else {
        NormalizedError {
            value: rmse,
            degenerate_range: true,
        }
    }
}

/// How the reduced model of each fold is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum FoldModel {
    /// Refit hyperparameters on every training complement. The fit seed is
    /// derived from `options.seed` and the fold index.
    Refit(FitOptions),
    /// Condition on each complement with fixed hyperparameters.
    Fixed(GpHyperparams),
}

/// Cross-validation NRMSE for explicit folds.
pub fn cv_error_with_folds(
    inputs: &[Vec<f64>],
    targets: &[f64],
    folds: &FoldAssignment,
    model: &FoldModel,
) -> Result<NormalizedError> {
    let n = targets.len();
    if n < 2 || inputs.len() != n || folds.len() != n {
        return Err(AosError::input("cross-validation needs ≥ 2 samples with one fold label each"));
    }
    let mut sum_sq = 0.0;
    for fold in 0..folds.k() {
        let (mut train_x, mut train_y, mut held_out) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            if folds.fold_of(i) == fold {
                held_out.push(i);
            } else {
                train_x.push(inputs[i].clone());
                train_y.push(targets[i]);
            }
        }
        if held_out.is_empty() {
            continue;
        }
        let reduced = match model {
            FoldModel::Refit(options) => {
                let options = FitOptions {
                    seed: rng::derive_seed(&[options.seed, fold as u64]),
                    ..options.clone()
                };
                fit(&train_x, &train_y, &options)?
            }
            FoldModel::Fixed(hp) => GpModel::new(train_x, train_y, hp.clone())?,
        };
        for i in held_out {
            let r = targets[i] - reduced.predict_mean(&inputs[i]);
            sum_sq += r * r;
        }
    }
    let (lo, hi) = min_max(targets);
    Ok(normalize(sum_sq, n, hi - lo))
}

/// K-fold cross-validation NRMSE with seeded folds and per-fold refits.
///
/// Samples are put into a canonical (lexicographic) order before folds are
/// drawn, so the result does not depend on the order of the training data.
pub fn cv_error(
    inputs: &[Vec<f64>],
    targets: &[f64],
    k: usize,
    seed: u64,
    options: &FitOptions,
) -> Result<NormalizedError> {
    if inputs.len() != targets.len() {
        return Err(AosError::input("number of inputs and targets differ"));
    }
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| {
        inputs[a]
            .iter()
            .zip(&inputs[b])
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| targets[a].total_cmp(&targets[b]))
    });
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| inputs[i].clone()).collect();
    let ys: Vec<f64> = order.iter().map(|&i| targets[i]).collect();
    let folds = assign_folds(ys.len(), k, seed)?;
    cv_error_with_folds(&xs, &ys, &folds, &FoldModel::Refit(options.clone()))
}

pub fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Validation RMSE divided by `max − min` of `range`.
pub fn nrmse_val(truth: &[f64], predictions: &[f64], range: (f64, f64)) -> Result<NormalizedError> {
    if truth.is_empty() || truth.len() != predictions.len() {
        return Err(AosError::input("truth and predictions must be non-empty and equally long"));
    }
    let sum_sq: f64 = truth.iter().zip(predictions).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok(normalize(sum_sq, truth.len(), range.1 - range.0))
}

/// Euclidean norm of the per-output errors.
pub fn nrmse_sum(per_output: &[f64]) -> f64 {
    math::sqrt(per_output.iter().map(|v| v * v).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub per_output: Vec<f64>,
    pub aggregate: f64,
}

impl ErrorReport {
    pub fn new(per_output: Vec<f64>) -> Self {
        let aggregate = nrmse_sum(&per_output);
        ErrorReport {
            per_output,
            aggregate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn leave_one_out_when_n_equals_k() {
        let f = assign_folds(10, 10, 3).unwrap();
        assert_eq!(f.k(), 10);
        assert!(f.sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn balanced_fold_sizes() {
        let f = assign_folds(23, 10, 3).unwrap();
        assert_eq!(f.sizes(), vec![3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn fold_count_shrinks_to_sample_count() {
        let f = assign_folds(5, 10, 3).unwrap();
        assert_eq!(f.k(), 5);
        assert!(assign_folds(1, 10, 3).is_err());
    }

    #[test]
    fn folds_are_deterministic_per_seed() {
        assert_eq!(assign_folds(40, 10, 8).unwrap(), assign_folds(40, 10, 8).unwrap());
        assert_ne!(assign_folds(40, 10, 8).unwrap(), assign_folds(40, 10, 9).unwrap());
    }

    #[test]
    fn constant_targets_give_zero_cv_error() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0, (i * 3 % 8) as f64 / 7.0]).collect();
        let e = cv_error(&x, &[2.5; 8], 4, 1, &FitOptions::default()).unwrap();
        assert!(e.value.abs() < 1e-6);
        assert!(e.degenerate_range);
    }

    fn se(a: &[f64], b: &[f64], hp: &GpHyperparams) -> f64 {
        let r2: f64 = a.iter().zip(b).zip(&hp.lengthscales).map(|((a, b), l)| ((a - b) / l).powi(2)).sum();
        hp.signal_variance * (-0.5 * r2).exp()
    }

    #[test]
    fn two_fold_matches_fold_by_fold_dense_evaluation() {
        let x = vec![vec![0.1, 0.3], vec![0.8, 0.2], vec![0.4, 0.9], vec![0.6, 0.6]];
        let y = vec![1.0, 2.0, 0.5, 1.6];
        let folds = FoldAssignment::new(vec![0, 1, 1, 0], 2).unwrap();
        let hp = GpHyperparams {
            lengthscales: vec![0.5, 0.5],
            signal_variance: 1.0,
            noise_variance: 0.01,
        };
        let got = cv_error_with_folds(&x, &y, &folds, &FoldModel::Fixed(hp.clone())).unwrap();

        let mut sum_sq = 0.0;
        for (train, test) in [([1usize, 2], [0usize, 3]), ([0, 3], [1, 2])] {
            let ybar = (y[train[0]] + y[train[1]]) / 2.0;
            let k = DMatrix::from_fn(2, 2, |i, j| {
                se(&x[train[i]], &x[train[j]], &hp) + if i == j { hp.noise_variance } else { 0.0 }
            });
            let kinv = k.try_inverse().unwrap();
            let yc = DVector::from_iterator(2, train.iter().map(|&i| y[i] - ybar));
            for t in test {
                let ks = DVector::from_iterator(2, train.iter().map(|&i| se(&x[i], &x[t], &hp)));
                let pred = ybar + (ks.transpose() * &kinv * &yc)[0];
                sum_sq += (y[t] - pred).powi(2);
            }
        }
        let want = (sum_sq / 4.0).sqrt() / 1.5;
        assert!((got.value - want).abs() < 1e-12, "{} vs {want}", got.value);
    }

    #[test]
    fn cv_error_is_permutation_invariant_with_carried_folds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 14;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1]).collect();
        let folds = assign_folds(n, 5, 4).unwrap();
        let perm: Vec<usize> = (0..n).map(|i| (i * 5 + 3) % n).collect();
        let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let fp = FoldAssignment::new(perm.iter().map(|&i| folds.fold_of(i)).collect(), folds.k()).unwrap();
        let hp = GpHyperparams {
            lengthscales: vec![0.4, 0.4],
            signal_variance: 1.0,
            noise_variance: 1e-4,
        };
        let a = cv_error_with_folds(&x, &y, &folds, &FoldModel::Fixed(hp.clone())).unwrap();
        let b = cv_error_with_folds(&xp, &yp, &fp, &FoldModel::Fixed(hp)).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
    }

    #[test]
    fn seeded_cv_error_ignores_training_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 17;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1] + 0.05 * rng.gen::<f64>()).collect();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 2) % n).collect();
        let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let opts = FitOptions { restarts: 2, ..FitOptions::default() };
        let a = cv_error(&x, &y, 10, 21, &opts).unwrap();
        let b = cv_error(&xp, &yp, 10, 21, &opts).unwrap();
        assert!((a.value - b.value).abs() < 1e-9, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn cv_error_shrinks_with_more_data() {
        let f = |p: &[f64]| (3.0 * p[0]).sin() + (2.0 * p[1]).cos();
        let opts = FitOptions { restarts: 1, ..FitOptions::default() };
        let (mut small, mut large) = (0.0, 0.0);
        for seed in 0..20u64 {
            for (n, acc) in [(10usize, &mut small), (40, &mut large)] {
                let x = rng::uniform_points(2, n, seed * 100 + n as u64);
                let y: Vec<f64> = x.iter().map(|p| f(p)).collect();
                *acc += cv_error(&x, &y, 10, seed, &opts).unwrap().value;
            }
        }
        assert!(large < small, "mean CV error at n=40 ({}) vs n=10 ({})", large / 20.0, small / 20.0);
    }

    #[test]
    fn nrmse_of_perfect_predictions_is_zero() {
        let t = [1.0, 2.0, 3.5];
        assert_eq!(nrmse_val(&t, &t, (1.0, 3.5)).unwrap().value, 0.0);
    }

    #[test]
    fn nrmse_of_constant_residual() {
        let t = [0.0, 1.0, 2.0, 4.0];
        let p: Vec<f64> = t.iter().map(|v| v - 0.3).collect();
        let e = nrmse_val(&t, &p, (0.0, 4.0)).unwrap();
        assert!((e.value - 0.3 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn nrmse_flags_zero_range() {
        let e = nrmse_val(&[1.0, 1.0], &[1.5, 0.5], (1.0, 1.0)).unwrap();
        assert!(e.degenerate_range);
        assert!((e.value - 0.5).abs() < 1e-15);
        assert!(nrmse_val(&[], &[], (0.0, 1.0)).is_err());
    }

    #[test]
    fn nrmse_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t: Vec<f64> = (0..121).map(|_| rng.gen::<f64>() * 3.0).collect();
        let p: Vec<f64> = t.iter().map(|v| v + rng.gen::<f64>() - 0.5).collect();
        let range = (-0.5, 3.2);
        let mut sq = Vec::new();
        for i in 0..t.len() {
            sq.push((t[i] - p[i]) * (t[i] - p[i]));
        }
        let mut mean = 0.0;
        for v in &sq {
            mean += v / sq.len() as f64;
        }
        let want = mean.sqrt() / 3.7;
        assert!((nrmse_val(&t, &p, range).unwrap().value - want).abs() < 1e-12);
    }

    #[test]
    fn nrmse_sum_examples() {
        assert!((nrmse_sum(&[0.3, 0.4]) - 0.5).abs() < 1e-15);
        assert_eq!(nrmse_sum(&[0.7, 0.0, 0.0]), 0.7);
        let v = [0.12, 0.05, 0.31];
        assert!((nrmse_sum(&v) - (0.12f64 * 0.12 + 0.05 * 0.05 + 0.31 * 0.31).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn nrmse_sum_obeys_norm_inequalities(v in proptest::collection::vec(0.0f64..10.0, 1..6)) {
            let s = nrmse_sum(&v);
            let max = v.iter().cloned().fold(0.0, f64::max);
            prop_assert!(s >= max - 1e-12);
            prop_assert!(s <= v.iter().sum::<f64>() + 1e-12);
            let r = ErrorReport::new(v.clone());
            prop_assert!((r.aggregate - v.iter().map(|x| x * x).sum::<f64>().sqrt()).abs() <= 1e-12);
        }

        #[test]
        fn doubling_residuals_doubles_nrmse(seed in any::<u64>(), shift in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<f64> = (0..30).map(|_| rng.gen::<f64>()).collect();
            let p: Vec<f64> = t.iter().map(|v| v + rng.gen::<f64>() - 0.5).collect();
            let p2: Vec<f64> = t.iter().zip(&p).map(|(t, p)| t + 2.0 * (p - t)).collect();
            let a = nrmse_val(&t, &p, (0.0, 1.0)).unwrap().value;
            let b = nrmse_val(&t, &p2, (0.0, 1.0)).unwrap().value;
            prop_assert!((b - 2.0 * a).abs() < 1e-12);
            // Shifting truth and predictions together leaves the value unchanged.
            let ts: Vec<f64> = t.iter().map(|v| v + shift).collect();
            let ps: Vec<f64> = p.iter().map(|v| v + shift).collect();
            let c = nrmse_val(&ts, &ps, (shift, 1.0 + shift)).unwrap().value;
            prop_assert!((c - a).abs() < 1e-9);
        }
    }
}
