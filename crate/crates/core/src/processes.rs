//! Synthetic multi-output test processes.
//!
//! Each output is a random smooth-or-rough function on `[0, 1]^d` plus
//! Gaussian noise whose standard deviation is the output's range divided by
//! its signal-to-noise ratio. Noise is drawn from a per-output counter-based
//! stream, so the `i`-th measurement of a run carries the same deviate no
//! matter which strategy requested it or where.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AosError, Result};
use crate::rng::{self, tag, NormalStream};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    Sigmoid,
    Polynomial,
    SigmoidWithSteps,
}

/// `Moderate` is "○", `High` is "+", `VeryHigh` is "++".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    Moderate,
    High,
    VeryHigh,
}

/// `High` is "+" (SNR 12), `VeryHigh` is "++" (SNR 7).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    High,
    VeryHigh,
}

impl NoiseLevel {
    pub fn snr(self) -> f64 {
        match self {
            NoiseLevel::High => 12.0,
            NoiseLevel::VeryHigh => 7.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            NoiseLevel::High => "+",
            NoiseLevel::VeryHigh => "++",
        }
    }
}

impl Complexity {
    pub fn symbol(self) -> &'static str {
        match self {
            Complexity::Moderate => "o",
            Complexity::High => "+",
            Complexity::VeryHigh => "++",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub model_type: ModelType,
    pub complexity: Complexity,
    pub noise: NoiseLevel,
}

impl OutputSpec {
    pub fn new(model_type: ModelType, complexity: Complexity, noise: NoiseLevel) -> Self {
        OutputSpec {
            model_type,
            complexity,
            noise,
        }
    }

    /// Only the model/complexity pairings of the built-in setups exist.
    pub fn validate(&self) -> Result<()> {
        let legal = matches!(
            (self.model_type, self.complexity),
            (ModelType::Polynomial, Complexity::Moderate)
                | (ModelType::Sigmoid, Complexity::High)
                | (ModelType::SigmoidWithSteps, Complexity::VeryHigh)
        );
        if legal {
            Ok(())
        } else {
            Err(AosError::config(alloc::format!(
                "{:?} outputs cannot have complexity {:?}",
                self.model_type, self.complexity
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupSpec {
    pub name: String,
    pub dim: usize,
    pub outputs: Vec<OutputSpec>,
}

impl SetupSpec {
    pub fn validate(&self) -> Result<()> {
        if self.outputs.is_empty() {
            return Err(AosError::config("a setup needs at least one output"));
        }
        if self.dim == 0 {
            return Err(AosError::config("input dimension must be positive"));
        }
        self.outputs.iter().try_for_each(OutputSpec::validate)
    }
}

/// The three two-input, three-output setups.
pub fn builtin_setups() -> Vec<SetupSpec> {
    use Complexity::*;
    use ModelType::*;
    use NoiseLevel::High as Noisy;
    use NoiseLevel::VeryHigh as VeryNoisy;
    let sig = OutputSpec::new(Sigmoid, High, Noisy);
    let poly = OutputSpec::new(Polynomial, Moderate, Noisy);
    let steps = OutputSpec::new(SigmoidWithSteps, VeryHigh, Noisy);
    vec![
        SetupSpec {
            name: "setup1".into(),
            dim: 2,
            outputs: vec![sig, sig, sig],
        },
        SetupSpec {
            name: "setup2".into(),
            dim: 2,
            outputs: vec![poly, poly, steps],
        },
        SetupSpec {
            name: "setup3".into(),
            dim: 2,
            outputs: vec![OutputSpec::new(Sigmoid, High, VeryNoisy), sig, steps],
        },
    ]
}

pub fn builtin_setup(name: &str) -> Option<SetupSpec> {
    builtin_setups().into_iter().find(|s| s.name == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidTerm {
    pub amplitude: f64,
    pub steepness: f64,
    /// Unit vector.
    pub direction: Vec<f64>,
    pub offset: f64,
}

impl SigmoidTerm {
    fn eval(&self, x: &[f64]) -> f64 {
        let proj: f64 = self.direction.iter().zip(x).map(|(w, x)| w * x).sum();
        self.amplitude * math::sigmoid(self.steepness * (proj - self.offset))
    }
}

/// `amplitude · [x_axis ≥ location]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTerm {
    pub axis: usize,
    pub location: f64,
    pub amplitude: f64,
}

impl StepTerm {
    fn eval(&self, x: &[f64]) -> f64 {
        if x[self.axis] >= self.location {
            self.amplitude
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TruthFunction {
    Sigmoid {
        terms: Vec<SigmoidTerm>,
    },
    /// Full quadratic: `[c₀, c_1..c_d, c_ij for i ≤ j]`.
    Polynomial {
        coefficients: Vec<f64>,
    },
    SigmoidWithSteps {
        terms: Vec<SigmoidTerm>,
        steps: Vec<StepTerm>,
    },
}

impl TruthFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TruthFunction::Sigmoid { terms } => terms.iter().map(|t| t.eval(x)).sum(),
            TruthFunction::Polynomial { coefficients } => {
                let d = x.len();
                let mut v = coefficients[0];
                let mut idx = 1;
                for xi in x {
                    v += coefficients[idx] * xi;
                    idx += 1;
                }
                for i in 0..d {
                    for j in i..d {
                        v += coefficients[idx] * x[i] * x[j];
                        idx += 1;
                    }
                }
                v
            }
            TruthFunction::SigmoidWithSteps { terms, steps } => {
                terms.iter().map(|t| t.eval(x)).sum::<f64>() + steps.iter().map(|s| s.eval(x)).sum::<f64>()
            }
        }
    }
}

/// Number of sigmoids in a sigmoid-type output.
pub const SIGMOID_TERMS: usize = 3;
/// Number of axis-aligned steps added for the highest complexity.
pub const STEP_TERMS: usize = 2;
/// Range of sigmoid steepness values.
pub const STEEPNESS_RANGE: (f64, f64) = (5.0, 15.0);

fn random_sigmoid<R: Rng>(rng: &mut R, dim: usize) -> SigmoidTerm {
    let mut direction: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut norm = math::sqrt(direction.iter().map(|v| v * v).sum());
    while norm < 1e-3 {
        direction = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        norm = math::sqrt(direction.iter().map(|v| v * v).sum());
    }
    direction.iter_mut().for_each(|v| *v /= norm);
    // Centre the transition inside the domain so every term is visible.
    let centre: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..0.8)).collect();
    let offset = direction.iter().zip(&centre).map(|(w, c)| w * c).sum();
    let magnitude = rng.gen_range(0.5..1.5);
    let amplitude = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
    SigmoidTerm {
        amplitude,
        steepness: rng.gen_range(STEEPNESS_RANGE.0..STEEPNESS_RANGE.1),
        direction,
        offset,
    }
}

fn random_step<R: Rng>(rng: &mut R, dim: usize) -> StepTerm {
    let magnitude = rng.gen_range(0.5..1.0);
    StepTerm {
        axis: rng.gen_range(0..dim),
        location: rng.gen_range(0.25..0.75),
        amplitude: if rng.gen_bool(0.5) { magnitude } else { -magnitude },
    }
}

/// Draws one truth function of the given type.
pub fn random_truth<R: Rng>(rng: &mut R, model_type: ModelType, dim: usize) -> TruthFunction {
    match model_type {
        ModelType::Sigmoid => TruthFunction::Sigmoid {
            terms: (0..SIGMOID_TERMS).map(|_| random_sigmoid(rng, dim)).collect(),
        },
        ModelType::Polynomial => {
            let count = 1 + dim + dim * (dim + 1) / 2;
            TruthFunction::Polynomial {
                coefficients: (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            }
        }
        ModelType::SigmoidWithSteps => TruthFunction::SigmoidWithSteps {
            terms: (0..SIGMOID_TERMS).map(|_| random_sigmoid(rng, dim)).collect(),
            steps: (0..STEP_TERMS).map(|_| random_step(rng, dim)).collect(),
        },
    }
}

/// Full-factorial grid over `[0, 1]^dim`, first axis varying slowest.
pub fn validation_grid(dim: usize, points_per_axis: usize) -> Vec<Vec<f64>> {
    assert!(points_per_axis >= 2, "a grid needs at least two points per axis");
    let total = points_per_axis.pow(dim as u32);
    let step = 1.0 / (points_per_axis - 1) as f64;
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; dim];
            for j in (0..dim).rev() {
                p[j] = (idx % points_per_axis) as f64 * step;
                idx /= points_per_axis;
            }
            p
        })
        .collect()
}

/// Resolution of the grid on which each output's true range is measured.
pub fn range_grid_points_per_axis(dim: usize) -> usize {
    match dim {
        1 | 2 => 101,
        3 => 21,
        _ => 5,
    }
}

/// Noise standard deviation for an output range and SNR.
pub fn sigma_from_snr(range: f64, snr: f64) -> Result<f64> {
    if !(range > 0.0 && range.is_finite()) || !(snr > 0.0 && snr.is_finite()) {
        return Err(AosError::input("range and SNR must be positive and finite"));
    }
    Ok(range / snr)
}

/// M truth functions with calibrated noise, fully determined by the setup
/// and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSuite {
    pub name: String,
    pub dim: usize,
    pub truth_functions: Vec<TruthFunction>,
    pub snr: Vec<f64>,
    pub noise_sigma: Vec<f64>,
    pub true_range: Vec<(f64, f64)>,
    pub run_seed: u64,
}

impl ProcessSuite {
    /// Builds a suite from explicit truth functions; ranges and noise levels
    /// are derived exactly as for generated suites.
    pub fn from_functions(name: String, dim: usize, truth_functions: Vec<TruthFunction>, snr: Vec<f64>, run_seed: u64) -> Result<Self> {
        if truth_functions.len() != snr.len() || truth_functions.is_empty() {
            return Err(AosError::input("need one SNR per truth function"));
        }
        let grid = validation_grid(dim, range_grid_points_per_axis(dim));
        let mut true_range = Vec::with_capacity(truth_functions.len());
        let mut noise_sigma = Vec::with_capacity(truth_functions.len());
        for (f, &s) in truth_functions.iter().zip(&snr) {
            let (lo, hi) = grid
                .iter()
                .map(|x| f.eval(x))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            true_range.push((lo, hi));
            noise_sigma.push(sigma_from_snr(hi - lo, s)?);
        }
        Ok(ProcessSuite {
            name,
            dim,
            truth_functions,
            snr,
            noise_sigma,
            true_range,
            run_seed,
        })
    }

    pub fn outputs(&self) -> usize {
        self.truth_functions.len()
    }

    /// Noise-free value of output `m` at `x`.
    pub fn truth(&self, m: usize, x: &[f64]) -> f64 {
        self.truth_functions[m].eval(x)
    }

    fn noise_stream(&self, m: usize) -> NormalStream {
        NormalStream::new(rng::derive_seed(&[self.run_seed, tag::NOISE, m as u64]))
    }

    /// Standard-normal deviate used for output `m` of measurement `draw_index`.
    pub fn noise_deviate(&self, m: usize, draw_index: u64) -> f64 {
        self.noise_stream(m).deviate(draw_index)
    }

    /// All outputs at `x`, with the noise of the `draw_index`-th
    /// measurement of the run.
    pub fn measure(&self, x: &[f64], draw_index: u64) -> Vec<f64> {
        (0..self.outputs())
            .map(|m| self.truth(m, x) + self.noise_sigma[m] * self.noise_deviate(m, draw_index))
            .collect()
    }

    pub fn without_noise(mut self) -> Self {
        self.noise_sigma.iter_mut().for_each(|s| *s = 0.0);
        self
    }
}

/// Draws the truth functions of `spec` from `seed`. Output `m`'s
/// parameters depend only on `(seed, m)`.
pub fn generate_suite(spec: &SetupSpec, seed: u64) -> Result<ProcessSuite> {
    spec.validate()?;
    let truths = spec
        .outputs
        .iter()
        .enumerate()
        .map(|(m, o)| {
            let mut r = rng::rng_from_seed(rng::derive_seed(&[seed, tag::SUITE, m as u64]));
            random_truth(&mut r, o.model_type, spec.dim)
        })
        .collect();
    let snr = spec.outputs.iter().map(|o| o.noise.snr()).collect();
    ProcessSuite::from_functions(spec.name.clone(), spec.dim, truths, snr, seed)
}
