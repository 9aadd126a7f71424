use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use super::drivers::{pick_destination, sample_factor_with};
use super::initial::{sample_initial_with, InitialLaw};
use super::rng::{path_rng, PathRng, Stream};
use crate::error::Result;
use crate::process::{evaluate_on_grid, ChainPath, FactorPath, IntensityModel, Jump, TimeGrid};
use crate::scenario::Scenario;

/// Samples the chain directly under the target measure given the factor
/// path: on each grid interval the generator is constant and jumps are
/// drawn by competing exponentials, restarting at each node.
pub fn simulate_direct_dsmc(
    model: &dyn IntensityModel,
    law: &InitialLaw,
    factor: &FactorPath,
    grid: &TimeGrid,
    seed: u64,
) -> Result<ChainPath> {
    simulate_direct_dsmc_with(model, law, factor, grid, &mut path_rng(seed, 0, Stream::Direct))
}

pub fn simulate_direct_dsmc_with(
    model: &dyn IntensityModel,
    law: &InitialLaw,
    factor: &FactorPath,
    grid: &TimeGrid,
    rng: &mut PathRng,
) -> Result<ChainPath> {
    let lambdas = evaluate_on_grid(model, factor, grid)?;
    let x0 = sample_initial_with(law, factor, rng);
    let mut x = x0;
    let mut jumps = Vec::new();
    for (k, lambda) in lambdas.iter().enumerate() {
        let end = grid.node(k + 1);
        let mut t = grid.node(k);
        loop {
            let q = -lambda.rate(x, x);
            if q <= 0.0 {
                break;
            }
            t += Exp::new(q).expect("positive rate").sample(rng);
            if t >= end {
                break;
            }
            let y = pick_destination(lambda.matrix(), x, q, rng);
            jumps.push(Jump { time: t, from: x, to: y });
            x = y;
        }
    }
    Ok(ChainPath::from_parts_unchecked(x0, jumps))
}

/// Unweighted paths drawn directly under the target measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectEnsemble {
    pub states: usize,
    pub grid: TimeGrid,
    pub paths: Vec<(FactorPath, ChainPath)>,
}

pub fn build_direct_ensemble(scenario: &Scenario, n: usize, seed: u64) -> Result<DirectEnsemble> {
    scenario.validate()?;
    let grid = scenario.grid();
    let paths = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let factor = sample_factor_with(&scenario.factor, &grid, &mut path_rng(seed, i, Stream::Factor));
            let chain = simulate_direct_dsmc_with(
                &scenario.intensity,
                &scenario.initial_law,
                &factor,
                &grid,
                &mut path_rng(seed, i, Stream::Direct),
            )?;
            Ok((factor, chain))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DirectEnsemble { states: scenario.states, grid, paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;
    use crate::process::IntensitySpec;

    #[test]
    fn zero_intensity_never_jumps() {
        let model = IntensitySpec::constant(nalgebra::DMatrix::zeros(3, 3)).unwrap();
        let law = InitialLaw::Fixed { probs: vec![0.2, 0.3, 0.5] };
        let grid = TimeGrid::new(5.0, 10).unwrap();
        let f = FactorPath::constant(&[0.0], 11);
        for seed in 0..100 {
            assert!(simulate_direct_dsmc(&model, &law, &f, &grid, seed).unwrap().jumps().is_empty());
        }
    }

    #[test]
    fn absorbing_two_state_survival() {
        let model = IntensitySpec::constant(from_rows(&[vec![-1.0, 1.0], vec![0.0, 0.0]])).unwrap();
        let law = InitialLaw::Fixed { probs: vec![1.0, 0.0] };
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let f = FactorPath::constant(&[0.0], 11);
        let n = 100_000u64;
        let paths: Vec<ChainPath> = (0..n)
            .map(|i| simulate_direct_dsmc_with(&model, &law, &f, &grid, &mut path_rng(8, i, Stream::Direct)).unwrap())
            .collect();
        for t in [0.25, 0.5, 1.0] {
            let stay = paths.iter().filter(|p| p.state_at(t) == 0).count() as f64 / n as f64;
            let p = (-t).exp();
            assert!((stay - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "t={t}: {stay} vs {p}");
        }
    }
}
