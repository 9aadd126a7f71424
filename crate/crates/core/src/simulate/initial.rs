use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::{path_rng, PathRng, Stream};
use crate::error::{Error, Result};
use crate::process::FactorPath;

/// Law of the initial state given time-0 factor information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    Fixed { probs: Vec<f64> },
    /// `positive` when the time-0 factor component is `> 0`, else `nonpositive`.
    FactorSign {
        component: usize,
        nonpositive: Vec<f64>,
        positive: Vec<f64>,
    },
}

fn check_probs(p: &[f64], d: usize) -> Result<()> {
    if p.len() != d {
        return Err(Error::Scenario(format!("initial law has {} entries, expected {d}", p.len())));
    }
    if p.iter().any(|&v| !(v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Scenario(format!("initial law {p:?} is not a probability vector")));
    }
    Ok(())
}

impl InitialLaw {
    pub fn validate(&self, d: usize, factor_dim: usize) -> Result<()> {
        match self {
            Self::Fixed { probs } => check_probs(probs, d),
            Self::FactorSign { component, nonpositive, positive } => {
                if *component >= factor_dim {
                    return Err(Error::Scenario("initial law reads a missing factor component".into()));
                }
                check_probs(nonpositive, d)?;
                check_probs(positive, d)
            }
        }
    }

    /// `mu_x` given the factor value at time 0.
    pub fn probs(&self, f0: &[f64]) -> &[f64] {
        match self {
            Self::Fixed { probs } => probs,
            Self::FactorSign { component, nonpositive, positive } => {
                if f0[*component] > 0.0 {
                    positive
                } else {
                    nonpositive
                }
            }
        }
    }
}

pub fn sample_initial(law: &InitialLaw, factor: &FactorPath, seed: u64) -> usize {
    sample_initial_with(law, factor, &mut path_rng(seed, 0, Stream::Initial))
}

pub fn sample_initial_with(law: &InitialLaw, factor: &FactorPath, rng: &mut PathRng) -> usize {
    let probs = law.probs(factor.at(0));
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (x, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = x;
        if u < acc {
            return x;
        }
    }
    last
}
