use rayon::prelude::*;

use super::drivers::sample_factor_with;
use super::initial::sample_initial_with;
use super::reference::simulate_reference_chain_with;
use super::rng::{path_rng, Stream};
use super::weight::{weight_from_intensities, PathWeight};
use crate::error::{Error, Result};
use crate::process::{evaluate_on_grid, ChainPath, FactorPath, TimeGrid};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPath {
    pub factor: FactorPath,
    pub chain: ChainPath,
    pub weight: f64,
    /// Density process at every grid node.
    pub node_weights: Vec<f64>,
}

/// Paths simulated under the reference measure together with their
/// densities; weighted averages over it estimate target-measure expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    pub scenario_hash: String,
    pub seed: u64,
    pub states: usize,
    pub grid: TimeGrid,
    pub paths: Vec<WeightedPath>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WeightStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub zero_weights: usize,
    pub ess: f64,
}

/// `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

impl WeightedEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.weight).collect()
    }

    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.weights())
    }

    pub fn weight_stats(&self) -> WeightStats {
        let w = self.weights();
        let n = w.len();
        let mean = w.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        WeightStats {
            n,
            mean,
            variance,
            se: (variance / n as f64).sqrt(),
            zero_weights: w.iter().filter(|&&v| v == 0.0).count(),
            ess: effective_sample_size(&w),
        }
    }
}

/// Simulates path `index` of an ensemble: factor, initial state and
/// reference chain from their own streams, then the density.
pub fn simulate_weighted_path(scenario: &Scenario, grid: &TimeGrid, seed: u64, index: u64) -> Result<WeightedPath> {
    let factor = sample_factor_with(&scenario.factor, grid, &mut path_rng(seed, index, Stream::Factor));
    let x0 = sample_initial_with(&scenario.initial_law, &factor, &mut path_rng(seed, index, Stream::Initial));
    let chain =
        simulate_reference_chain_with(&scenario.reference_rates, x0, grid, &mut path_rng(seed, index, Stream::Chain));
    let lambdas = evaluate_on_grid(&scenario.intensity, &factor, grid)?;
    let PathWeight { terminal, nodes } = weight_from_intensities(&chain, &lambdas, &scenario.reference_rates, grid)?;
    Ok(WeightedPath { factor, chain, weight: terminal, node_weights: nodes })
}

/// `n` independent weighted paths. The result depends only on
/// `(scenario, n, seed)`, not on the worker count.
pub fn build_weighted_ensemble(scenario: &Scenario, n: usize, seed: u64) -> Result<WeightedEnsemble> {
    if n == 0 {
        return Err(Error::Scenario("ensemble size must be positive".into()));
    }
    scenario.validate()?;
    let grid = scenario.grid();
    let paths = (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_weighted_path(scenario, &grid, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightedEnsemble { scenario_hash: scenario.hash(), seed, states: scenario.states, grid, paths })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ess_extremes() {
        assert_eq!(effective_sample_size(&[1.0; 10]), 10.0);
        let mut w = vec![0.0; 10];
        w[0] = 2.0;
        assert_eq!(effective_sample_size(&w), 1.0);
        assert_eq!(effective_sample_size(&[0.0, 0.0]), 0.0);
    }
}
