use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn hp(ls: &[f64], sf2: f64, sn2: f64) -> GpHyperparams {
    GpHyperparams {
        lengthscales: ls.to_vec(),
        signal_variance: sf2,
        noise_variance: sn2,
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// Dense-inverse reference for mean and variance (independent of the
/// Cholesky path).
fn dense_oracle(x: &[Vec<f64>], y: &[f64], h: &GpHyperparams, t: &[f64]) -> (f64, f64) {
    let n = x.len();
    let se = |a: &[f64], b: &[f64]| {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&h.lengthscales)
            .map(|((a, b), l)| ((a - b) / l).powi(2))
            .sum();
        h.signal_variance * (-0.5 * r2).exp()
    };
    let k = DMatrix::from_fn(n, n, |i, j| se(&x[i], &x[j]) + if i == j { h.noise_variance } else { 0.0 });
    let kinv = k.try_inverse().unwrap();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let ks = DVector::from_iterator(n, x.iter().map(|xi| se(xi, t)));
    let mean = ybar + (ks.transpose() * &kinv * yc)[0];
    let var = h.signal_variance - (ks.transpose() * &kinv * &ks)[0];
    (mean, var.max(0.0))
}

#[test]
fn kernel_at_zero_distance_is_signal_variance() {
    let h = hp(&[0.4, 0.9], 2.0, 0.0);
    assert_eq!(kernel(&[0.3, 0.7], &[0.3, 0.7], &h).unwrap(), 2.0);
}

#[test]
fn kernel_unit_distance_value() {
    let h = hp(&[1.0, 1.0], 1.0, 0.0);
    let k = kernel(&[0.0, 0.0], &[1.0, 0.0], &h).unwrap();
    assert!((k - (-0.5f64).exp()).abs() < 1e-15);
    assert!((k - 0.6065).abs() < 1e-4);
}

#[test]
fn kernel_is_symmetric_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = hp(&[0.3, 1.7], 1.3, 0.0);
    for _ in 0..100 {
        let a: Vec<f64> = (0..2).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..2).map(|_| rng.gen()).collect();
        let ab = kernel(&a, &b, &h).unwrap();
        assert_eq!(ab, kernel(&b, &a, &h).unwrap());
        assert!(ab > 0.0 && ab <= 1.3);
    }
}

#[test]
fn kernel_rejects_dimension_mismatch() {
    let h = hp(&[1.0, 1.0], 1.0, 0.0);
    assert!(matches!(kernel(&[0.0], &[1.0, 0.0], &h), Err(AosError::Input(_))));
}

#[test]
fn lml_scalar_case() {
    let m = GpModel::new(vec![vec![0.5]], vec![0.0], hp(&[1.0], 0.75, 0.25)).unwrap();
    let want = -0.5 * (2.0 * core::f64::consts::PI).ln();
    assert!((m.log_marginal_likelihood() - want).abs() < 1e-12);
    assert!((m.log_marginal_likelihood() + 0.9189).abs() < 1e-4);
}

#[test]
fn lml_two_point_matches_explicit_inverse() {
    let x = vec![vec![0.1, 0.2], vec![0.6, 0.9]];
    let y = vec![1.3, -0.4];
    let h = hp(&[0.5, 0.8], 1.7, 0.05);
    let m = GpModel::new(x.clone(), y.clone(), h.clone()).unwrap();
    // Explicit 2×2 algebra on centred targets.
    let ybar = 0.5 * (y[0] + y[1]);
    let (y0, y1) = (y[0] - ybar, y[1] - ybar);
    let k01 = kernel(&x[0], &x[1], &h).unwrap();
    let a = h.signal_variance + h.noise_variance;
    let det = a * a - k01 * k01;
    let quad = (a * y0 * y0 - 2.0 * k01 * y0 * y1 + a * y1 * y1) / det;
    let want = -0.5 * quad - 0.5 * det.ln() - (2.0 * core::f64::consts::PI).ln();
    assert!((m.log_marginal_likelihood() - want).abs() < 1e-10);
}

#[test]
fn lml_with_zero_targets_is_pure_complexity_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_points(&mut rng, 6, 2);
    let m = GpModel::new(x, vec![0.0; 6], hp(&[0.3, 0.3], 1.0, 0.01)).unwrap();
    let l = m.factor();
    let logdiag: f64 = (0..6).map(|i| l[i * 6 + i].ln()).sum();
    let want = -logdiag - 3.0 * (2.0 * core::f64::consts::PI).ln();
    assert!((m.log_marginal_likelihood() - want).abs() < 1e-12);
}

#[test]
fn lml_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=10 {
        let x = random_points(&mut rng, n, 2);
        let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let h = hp(&[0.2 + rng.gen::<f64>(), 0.2 + rng.gen::<f64>()], 1.5, 0.02);
        let m = GpModel::new(x.clone(), y.clone(), h.clone()).unwrap();
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel(&x[i], &x[j], &h).unwrap() + if i == j { h.noise_variance } else { 0.0 }
        });
        let ybar = y.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
        let quad = (yc.transpose() * k.clone().try_inverse().unwrap() * &yc)[0];
        let want = -0.5 * quad - 0.5 * k.determinant().ln() - 0.5 * n as f64 * (2.0 * core::f64::consts::PI).ln();
        assert!((m.log_marginal_likelihood() - want).abs() < 1e-8, "n = {n}");
    }
}

#[test]
fn factor_reproduces_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random_points(&mut rng, 12, 2);
    let y: Vec<f64> = (0..12).map(|i| i as f64).collect();
    let h = hp(&[0.3, 0.5], 2.0, 0.1);
    let m = GpModel::new(x.clone(), y, h.clone()).unwrap();
    assert_eq!(m.jitter(), 0.0);
    let l = m.factor();
    for i in 0..12 {
        for j in 0..12 {
            let llt: f64 = (0..12).map(|k| l[i * 12 + k] * l[j * 12 + k]).sum();
            let kij = kernel(&x[i], &x[j], &h).unwrap() + if i == j { h.noise_variance } else { 0.0 };
            assert!((llt - kij).abs() <= 1e-8 * kij.abs().max(1.0));
        }
    }
}

#[test]
fn noiseless_interpolation_at_training_input() {
    let x = vec![vec![0.1, 0.1], vec![0.5, 0.8], vec![0.9, 0.3]];
    let y = vec![1.0, -2.0, 0.5];
    let m = GpModel::new(x.clone(), y.clone(), hp(&[0.3, 0.3], 1.0, 0.0)).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        let p = m.predict(xi);
        assert!((p.mean - yi).abs() < 1e-8);
        assert!(p.variance.abs() < 1e-8);
    }
}

#[test]
fn far_point_reverts_to_prior() {
    let x = vec![vec![0.1, 0.1], vec![0.2, 0.15]];
    let y = vec![3.0, 5.0];
    let m = GpModel::new(x, y, hp(&[0.05, 0.05], 2.5, 0.01)).unwrap();
    let p = m.predict(&[0.95, 0.95]);
    assert!((p.mean - 4.0).abs() < 1e-10);
    assert!((p.variance - 2.5).abs() < 1e-10);
}

#[test]
fn three_point_prediction_matches_linear_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_points(&mut rng, 3, 2);
    let y = vec![0.4, 1.9, -0.7];
    let h = hp(&[0.4, 0.7], 1.2, 0.03);
    let m = GpModel::new(x.clone(), y.clone(), h.clone()).unwrap();
    for _ in 0..20 {
        let t: Vec<f64> = (0..2).map(|_| rng.gen()).collect();
        let (mean, var) = dense_oracle(&x, &y, &h, &t);
        let p = m.predict(&t);
        assert!((p.mean - mean).abs() < 1e-10);
        assert!((p.variance - var).abs() < 1e-10);
    }
}

#[test]
fn escalating_jitter_handles_duplicate_inputs() {
    let x = vec![vec![0.5, 0.5]; 4];
    let m = GpModel::new(x, vec![1.0, 1.1, 0.9, 1.0], hp(&[0.3, 0.3], 1.0, 0.0)).unwrap();
    assert!(m.jitter() > 0.0 && m.jitter() <= 1e-6);
    assert!(m.predict(&[0.5, 0.5]).mean.is_finite());
}

#[test]
fn lml_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_points(&mut rng, 15, 2);
    let y: Vec<f64> = x.iter().map(|p| (4.0 * p[0]).sin() + p[1] * p[1]).collect();
    let theta = [(-1.2f64), -0.5, 0.3, -3.0];
    let (g, fd) = fit::objective_gradient_check(&x, &y, &theta);
    for (a, b) in g.iter().zip(&fd) {
        assert!((a - b).abs() < 1e-5 * b.abs().max(1.0), "{g:?} vs {fd:?}");
    }
}

#[test]
fn fit_recovers_constant_function() {
    let x = vec![vec![0.1, 0.2], vec![0.5, 0.5], vec![0.9, 0.7]];
    let m = fit(&x, &[5.0, 5.0, 5.0], &FitOptions::default()).unwrap();
    for t in [[0.0, 0.0], [0.3, 0.8], [1.0, 1.0]] {
        assert!((m.predict(&t).mean - 5.0).abs() <= 0.1);
    }
    let x4 = vec![vec![0.1, 0.2], vec![0.5, 0.5], vec![0.9, 0.7], vec![0.2, 0.9]];
    let m = fit(&x4, &[5.0; 4], &FitOptions::default()).unwrap();
    assert!((m.predict(&[0.6, 0.1]).mean - 5.0).abs() <= 0.1);
}

#[test]
fn fit_recovers_generating_lengthscale() {
    // Draw one sample path of a zero-mean GP with a known lengthscale.
    let truth = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20;
    let x: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 + rng.gen::<f64>()) / n as f64]).collect();
    let h = hp(&[truth], 1.0, 0.0);
    let k = DMatrix::from_fn(n, n, |i, j| kernel(&x[i], &x[j], &h).unwrap() + if i == j { 1e-10 } else { 0.0 });
    let l = k.cholesky().unwrap().l();
    let noise = crate::rng::NormalStream::new(3);
    let z = DVector::from_iterator(n, (0..n as u64).map(|i| noise.deviate(i)));
    let y: Vec<f64> = (l * z).iter().copied().collect();
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    let ell = m.hyperparams().lengthscales[0];
    assert!(ell > truth / 2.0 && ell < truth * 2.0, "fitted lengthscale {ell}");
}

#[test]
fn fit_is_deterministic_and_beats_start_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = random_points(&mut rng, 25, 2);
    let y: Vec<f64> = x.iter().map(|p| (6.0 * p[0]).sin() * p[1] + 0.05 * rng.gen::<f64>()).collect();
    let opts = FitOptions {
        seed: 99,
        ..FitOptions::default()
    };
    let a = fit(&x, &y, &opts).unwrap();
    let b = fit(&x, &y, &opts).unwrap();
    assert_eq!(a.hyperparams(), b.hyperparams());
    for i in 0..2 {
        assert_eq!(a.hyperparams().lengthscales[i].to_bits(), b.hyperparams().lengthscales[i].to_bits());
    }
    // The box centre is the first start point.
    let var = {
        let mean = y.iter().sum::<f64>() / 25.0;
        y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 25.0
    };
    let centre = hp(
        &[(0.01f64 * 10.0).sqrt(), (0.01f64 * 10.0).sqrt()],
        (1e-4 * 10.0f64).sqrt() * var,
        (1e-8f64).sqrt() * var,
    );
    let at_centre = GpModel::new(x.clone(), y.clone(), centre).unwrap();
    assert!(a.log_marginal_likelihood() >= at_centre.log_marginal_likelihood() - 1e-9);
    let bounds = HyperparamBounds::default();
    for l in &a.hyperparams().lengthscales {
        assert!(*l >= bounds.lengthscale.0 * (1.0 - 1e-12) && *l <= bounds.lengthscale.1 * (1.0 + 1e-12));
    }
}

#[test]
fn tiny_fits_use_box_centre() {
    let m = fit(&[vec![0.2, 0.2], vec![0.4, 0.9]], &[1.0, 3.0], &FitOptions::default()).unwrap();
    assert!((m.hyperparams().lengthscales[0] - 0.1f64.sqrt()).abs() < 1e-12);
    // Geometric centre of [1e-4, 10] · var(y), with var(y) = 1.
    assert!((m.hyperparams().signal_variance - 1e-3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn fit_rejects_non_finite_targets() {
    let r = fit(&[vec![0.1], vec![0.2], vec![0.3]], &[1.0, f64::NAN, 0.0], &FitOptions::default());
    assert!(matches!(r, Err(AosError::Input(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn predict_matches_dense_oracle(seed in any::<u64>(), n in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_points(&mut rng, n, 2);
        let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let h = hp(&[0.1 + rng.gen::<f64>(), 0.1 + rng.gen::<f64>()], 0.5 + rng.gen::<f64>(), 1e-3 + 0.1 * rng.gen::<f64>());
        let m = GpModel::new(x.clone(), y.clone(), h.clone()).unwrap();
        for _ in 0..5 {
            let t: Vec<f64> = (0..2).map(|_| rng.gen()).collect();
            let (mean, var) = dense_oracle(&x, &y, &h, &t);
            let p = m.predict(&t);
            prop_assert!((p.mean - mean).abs() < 1e-8);
            prop_assert!((p.variance - var).abs() < 1e-8);
            prop_assert!(p.variance >= 0.0 && p.variance <= h.signal_variance + 1e-8);
        }
    }

    #[test]
    fn adding_a_point_never_increases_variance(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_points(&mut rng, n + 1, 2);
        let y: Vec<f64> = (0..=n).map(|_| rng.gen()).collect();
        let h = hp(&[0.2, 0.4], 1.0, 1e-2);
        let small = GpModel::new(x[..n].to_vec(), y[..n].to_vec(), h.clone()).unwrap();
        let big = GpModel::new(x, y, h).unwrap();
        for _ in 0..10 {
            let t: Vec<f64> = (0..2).map(|_| rng.gen()).collect();
            prop_assert!(big.predict_variance(&t) <= small.predict_variance(&t) + 1e-10);
        }
    }

    #[test]
    fn permuting_training_points_leaves_predictions_unchanged(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_points(&mut rng, n, 2);
        let y: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let h = hp(&[0.3, 0.3], 1.0, 1e-2);
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.swap(0, n / 2);
        let xp = order.iter().map(|&i| x[i].clone()).collect();
        let yp = order.iter().map(|&i| y[i]).collect();
        let a = GpModel::new(x, y, h.clone()).unwrap();
        let b = GpModel::new(xp, yp, h).unwrap();
        let t: Vec<f64> = (0..2).map(|_| rng.gen()).collect();
        let (pa, pb) = (a.predict(&t), b.predict(&t));
        prop_assert!((pa.mean - pb.mean).abs() < 1e-10);
        prop_assert!((pa.variance - pb.variance).abs() < 1e-10);
    }
}
