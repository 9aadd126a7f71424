use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng::{path_rng, PathRng, Stream};
use crate::error::{Error, Result};
use crate::process::{FactorPath, RateMatrix, TimeGrid};

/// Factor process families available to scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "driver", rename_all = "snake_case")]
pub enum FactorDriver {
    /// A flat path.
    Constant { value: Vec<f64> },
    /// Independent Brownian components with `N(0, dt)` increments. The
    /// starting value is `N(initial_mean, initial_std^2)`, which makes it
    /// time-0 information.
    Brownian {
        dim: usize,
        #[serde(default)]
        initial_mean: f64,
        #[serde(default)]
        initial_std: f64,
    },
    /// A finite-state continuous-time chain on `0..d` with exponential
    /// holding times. Its jump times are recorded on the path.
    MarkovChain { generator: RateMatrix, initial_state: usize },
}

impl FactorDriver {
    pub fn dim(&self) -> usize {
        match self {
            Self::Constant { value } => value.len(),
            Self::Brownian { dim, .. } => *dim,
            Self::MarkovChain { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } if value.is_empty() || value.iter().any(|v| !v.is_finite()) => {
                Err(Error::Scenario("constant driver needs finite values".into()))
            }
            Self::Brownian { dim, initial_mean, initial_std }
                if *dim == 0 || !initial_mean.is_finite() || !(initial_std.is_finite() && *initial_std >= 0.0) =>
            {
                Err(Error::Scenario("brownian driver needs dim >= 1 and a finite initial law".into()))
            }
            Self::MarkovChain { generator, initial_state } if *initial_state >= generator.dim() => {
                Err(Error::Scenario("factor chain initial state out of range".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Samples a factor path on `grid` from the factor stream of path 0.
pub fn sample_factor(driver: &FactorDriver, grid: &TimeGrid, seed: u64) -> Result<FactorPath> {
    driver.validate()?;
    Ok(sample_factor_with(driver, grid, &mut path_rng(seed, 0, Stream::Factor)))
}

pub fn sample_factor_with(driver: &FactorDriver, grid: &TimeGrid, rng: &mut PathRng) -> FactorPath {
    let nodes = grid.steps() + 1;
    match driver {
        FactorDriver::Constant { value } => FactorPath::constant(value, nodes),
        FactorDriver::Brownian { dim, initial_mean, initial_std } => {
            let sd = grid.dt().sqrt();
            let mut values = Vec::with_capacity(nodes * dim);
            for _ in 0..*dim {
                let z: f64 = rng.sample(StandardNormal);
                values.push(initial_mean + initial_std * z);
            }
            for k in 1..nodes {
                for c in 0..*dim {
                    let z: f64 = rng.sample(StandardNormal);
                    let prev = values[(k - 1) * dim + c];
                    values.push(prev + sd * z);
                }
            }
            FactorPath::new(*dim, values, Vec::new()).expect("consistent dimensions")
        }
        FactorDriver::MarkovChain { generator, initial_state } => {
            let g = generator.matrix();
            let horizon = grid.horizon();
            let mut state = *initial_state;
            let mut t = 0.0;
            let mut jumps: Vec<(f64, usize)> = Vec::new();
            loop {
                let q = -g[(state, state)];
                if q <= 0.0 {
                    break;
                }
                t += Exp::new(q).expect("positive rate").sample(rng);
                if t > horizon {
                    break;
                }
                state = pick_destination(g, state, q, rng);
                jumps.push((t, state));
            }
            let mut values = Vec::with_capacity(nodes);
            let mut current = *initial_state;
            let mut next = 0;
            for k in 0..nodes {
                let tk = grid.node(k);
                while next < jumps.len() && jumps[next].0 <= tk {
                    current = jumps[next].1;
                    next += 1;
                }
                values.push(current as f64);
            }
            let times = jumps.into_iter().map(|(t, _)| t).collect();
            FactorPath::new(1, values, times).expect("consistent dimensions")
        }
    }
}

/// Destination of a jump from `x`, chosen with probability `g[x][y] / q`.
pub(crate) fn pick_destination(g: &nalgebra::DMatrix<f64>, x: usize, q: f64, rng: &mut PathRng) -> usize {
    let u: f64 = rng.random::<f64>() * q;
    let mut acc = 0.0;
    let mut last = x;
    for y in 0..g.ncols() {
        if y == x || g[(x, y)] <= 0.0 {
            continue;
        }
        acc += g[(x, y)];
        last = y;
        if u < acc {
            return y;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 20).unwrap()
    }

    #[test]
    fn constant_driver_is_flat() {
        let f = sample_factor(&FactorDriver::Constant { value: vec![0.5] }, &grid(), 9).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.5));
        assert!(f.jump_times().is_empty());
    }

    #[test]
    fn brownian_is_reproducible() {
        let d = FactorDriver::Brownian { dim: 2, initial_mean: 0.0, initial_std: 0.0 };
        let a = sample_factor(&d, &grid(), 11).unwrap();
        let b = sample_factor(&d, &grid(), 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.at(0), &[0.0, 0.0]);
        assert_ne!(a, sample_factor(&d, &grid(), 12).unwrap());
    }

    #[test]
    fn brownian_terminal_variance_is_horizon() {
        let d = FactorDriver::Brownian { dim: 1, initial_mean: 0.0, initial_std: 0.0 };
        let g = grid();
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|i| sample_factor_with(&d, &g, &mut path_rng(5, i, Stream::Factor)).at(20)[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // SE of the sample variance of a normal: sigma^2 * sqrt(2/(n-1))
        let se = 1.0 * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "variance {var}");
    }

    #[test]
    fn markov_factor_records_jumps_consistent_with_node_values() {
        let generator = RateMatrix::try_from(vec![vec![-3.0, 3.0], vec![2.0, -2.0]]).unwrap();
        let d = FactorDriver::MarkovChain { generator, initial_state: 0 };
        let f = sample_factor(&d, &grid(), 3).unwrap();
        assert_eq!(f.at(0), &[0.0]);
        let g = grid();
        for k in 0..=20 {
            let flips = f.jump_times().iter().filter(|&&u| u <= g.node(k)).count();
            assert_eq!(f.at(k)[0] as usize, flips % 2);
        }
    }

    #[test]
    fn invalid_drivers_are_rejected() {
        assert!(FactorDriver::Brownian { dim: 0, initial_mean: 0.0, initial_std: 0.0 }.validate().is_err());
        assert!(FactorDriver::Constant { value: vec![] }.validate().is_err());
    }
}
