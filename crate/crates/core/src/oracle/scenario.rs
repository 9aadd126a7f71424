//! Discrete-time scenarios: fair-bit factor, Euler one-step matrices.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::process::RateMatrix;
use crate::simulate::ReferenceRates;

pub const MAX_STEPS: usize = 8;
pub const MAX_STATES: usize = 3;

/// Intensity table `Lambda_k(eps_1..eps_k)` used on the step into `X_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscreteIntensity {
    Constant { rates: RateMatrix },
    FirstBit { zero: RateMatrix, one: RateMatrix },
    LastBit { zero: RateMatrix, one: RateMatrix },
    /// `base + (eps_1 + .. + eps_k) * per_bit`.
    CumulativeBits { base: RateMatrix, per_bit: RateMatrix },
}

impl DiscreteIntensity {
    fn matrices(&self) -> Vec<&RateMatrix> {
        match self {
            Self::Constant { rates } => vec![rates],
            Self::FirstBit { zero, one } | Self::LastBit { zero, one } => vec![zero, one],
            Self::CumulativeBits { base, per_bit } => vec![base, per_bit],
        }
    }

    /// Intensity on the step into `X_k`, `k >= 1`. Only bits `1..=k` are read.
    pub fn at(&self, k: usize, bits: u16) -> Matrix {
        let bit = |i: usize| (bits >> (i - 1)) & 1 == 1;
        match self {
            Self::Constant { rates } => rates.matrix().clone(),
            Self::FirstBit { zero, one } => pick(bit(1), zero, one),
            Self::LastBit { zero, one } => pick(bit(k), zero, one),
            Self::CumulativeBits { base, per_bit } => {
                let s = (1..=k).filter(|&i| bit(i)).count() as f64;
                base.matrix() + per_bit.matrix() * s
            }
        }
    }

    /// Largest `|lambda^{xx}|` over every reachable table entry.
    fn max_exit_rate(&self, steps: usize) -> f64 {
        let exit = |m: &Matrix| (0..m.nrows()).map(|i| -m[(i, i)]).fold(0.0, f64::max);
        match self {
            Self::CumulativeBits { base, per_bit } => {
                exit(base.matrix()) + steps as f64 * exit(per_bit.matrix())
            }
            _ => self.matrices().into_iter().map(|m| exit(m.matrix())).fold(0.0, f64::max),
        }
    }
}

fn pick(one_bit: bool, zero: &RateMatrix, one: &RateMatrix) -> Matrix {
    if one_bit { one.matrix().clone() } else { zero.matrix().clone() }
}

/// Deliberate breaks of the conditional Markov structure, for negative tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantedViolation {
    /// Off-diagonal rates on the step into `X_step` are multiplied by
    /// `scale` when `X_0` is the first state.
    ChainMemory { step: usize, scale: f64 },
    /// The initial law depends on the last bit `eps_K`.
    FutureBitInitialLaw { zero: Vec<f64>, one: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteScenario {
    pub name: String,
    pub steps: usize,
    pub step_size: f64,
    pub states: usize,
    pub intensity: DiscreteIntensity,
    pub reference_rates: ReferenceRates,
    pub initial_law: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_violation: Option<PlantedViolation>,
}

impl DiscreteScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Self = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Constant-intensity scenario with no planted violation.
    pub fn constant(name: &str, rates: Matrix, steps: usize, step_size: f64, initial_law: Vec<f64>) -> Result<Self> {
        let d = rates.nrows();
        let sc = Self {
            name: name.to_string(),
            steps,
            step_size,
            states: d,
            reference_rates: ReferenceRates::new(Matrix::from_fn(d, d, |i, j| {
                if i == j { -((d - 1) as f64) } else { 1.0 }
            }))?,
            intensity: DiscreteIntensity::Constant { rates: RateMatrix::new(rates)? },
            initial_law,
            planted_violation: None,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.states < 2 {
            return Err(Error::Scenario("need at least one step and two states".into()));
        }
        if self.steps > MAX_STEPS || self.states > MAX_STATES {
            return Err(Error::TooLarge(format!(
                "K = {}, d = {} exceeds the guard K <= {MAX_STEPS}, d <= {MAX_STATES}",
                self.steps, self.states
            )));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Scenario("step_size must be positive".into()));
        }
        let d = self.states;
        if self.intensity.matrices().iter().any(|m| m.dim() != d) || self.reference_rates.dim() != d {
            return Err(Error::Scenario("rate tables have the wrong dimension".into()));
        }
        let mut exit = self.intensity.max_exit_rate(self.steps);
        match &self.planted_violation {
            Some(PlantedViolation::ChainMemory { step, scale }) => {
                if *step == 0 || *step > self.steps || !(*scale >= 0.0) {
                    return Err(Error::Scenario("chain_memory needs 1 <= step <= K and scale >= 0".into()));
                }
                exit *= scale.max(1.0);
            }
            Some(PlantedViolation::FutureBitInitialLaw { zero, one }) => {
                check_law(zero, d)?;
                check_law(one, d)?;
            }
            None => {}
        }
        if exit * self.step_size > 1.0 + 1e-15 {
            return Err(Error::Scenario("one-step matrices are not stochastic (step_size too large)".into()));
        }
        let a = self.reference_rates.matrix();
        let a_exit = (0..d).map(|i| -a[(i, i)]).fold(0.0, f64::max);
        if a_exit * self.step_size >= 1.0 {
            return Err(Error::Scenario("reference one-step matrix needs a positive diagonal".into()));
        }
        check_law(&self.initial_law, d)
    }

    /// Initial law given the full bit sequence.
    pub fn initial_probs(&self, bits: u16) -> &[f64] {
        match &self.planted_violation {
            Some(PlantedViolation::FutureBitInitialLaw { zero, one }) => {
                if (bits >> (self.steps - 1)) & 1 == 1 { one } else { zero }
            }
            _ => &self.initial_law,
        }
    }

    /// Bit-measurable one-step matrix `I + Lambda_k Delta` into `X_k`.
    pub fn one_step(&self, k: usize, bits: u16) -> Matrix {
        let d = self.states;
        Matrix::identity(d, d) + self.intensity.at(k, bits) * self.step_size
    }

    /// Intensity entry actually driving the step into `X_k`. It differs
    /// from [`DiscreteIntensity::at`] only under a planted chain-memory
    /// violation.
    pub fn rate(&self, k: usize, bits: u16, x0: usize, from: usize, to: usize) -> f64 {
        let r = self.intensity.at(k, bits)[(from, to)];
        match &self.planted_violation {
            Some(PlantedViolation::ChainMemory { step, scale }) if *step == k && x0 == 0 => r * scale,
            _ => r,
        }
    }

    /// Transition probability actually used on the step into `X_k`.
    pub fn step_prob(&self, k: usize, bits: u16, x0: usize, from: usize, to: usize) -> f64 {
        let stay = if from == to { 1.0 } else { 0.0 };
        stay + self.rate(k, bits, x0, from, to) * self.step_size
    }

    pub fn reference_step(&self) -> Matrix {
        let d = self.states;
        Matrix::identity(d, d) + self.reference_rates.matrix() * self.step_size
    }
}

fn check_law(p: &[f64], d: usize) -> Result<()> {
    if p.len() != d || p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Scenario(format!("initial law must be a probability vector of length {d}")));
    }
    Ok(())
}
