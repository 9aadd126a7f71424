use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::drivers::pick_destination;
use super::rng::{path_rng, PathRng, Stream};
use crate::error::{Error, Result};
use crate::linalg::{to_rows, Matrix};
use crate::process::{ChainPath, Jump, RateMatrix, TimeGrid};

/// Rates `a^{xy}` of the independent Poisson processes that drive the chain
/// under the reference measure. Every off-diagonal rate is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ReferenceRates(RateMatrix);

impl TryFrom<Vec<Vec<f64>>> for ReferenceRates {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = RateMatrix::try_from(rows)?;
        let a = m.matrix();
        for x in 0..a.nrows() {
            for y in 0..a.ncols() {
                if x != y && !(a[(x, y)] > 0.0) {
                    return Err(Error::Scenario(format!(
                        "reference rate a[{x}][{y}] = {} must be strictly positive",
                        a[(x, y)]
                    )));
                }
            }
        }
        Ok(Self(m))
    }
}

impl From<ReferenceRates> for Vec<Vec<f64>> {
    fn from(r: ReferenceRates) -> Self {
        to_rows(r.0.matrix())
    }
}

impl ReferenceRates {
    pub fn new(m: Matrix) -> Result<Self> {
        Self::try_from(to_rows(&m))
    }

    pub fn matrix(&self) -> &Matrix {
        self.0.matrix()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Reference-measure chain: from `x`, the next event comes after
/// `Exp(-a^{xx})` and goes to `y` with probability `a^{xy} / -a^{xx}`.
pub fn simulate_reference_chain(rates: &ReferenceRates, x0: usize, grid: &TimeGrid, seed: u64) -> ChainPath {
    simulate_reference_chain_with(rates, x0, grid, &mut path_rng(seed, 0, Stream::Chain))
}

pub fn simulate_reference_chain_with(
    rates: &ReferenceRates,
    x0: usize,
    grid: &TimeGrid,
    rng: &mut PathRng,
) -> ChainPath {
    let a = rates.matrix();
    let horizon = grid.horizon();
    let mut x = x0;
    let mut t = 0.0;
    let mut jumps = Vec::new();
    loop {
        let q = -a[(x, x)];
        t += Exp::new(q).expect("positive total rate").sample(rng);
        if t > horizon {
            break;
        }
        let y = pick_destination(a, x, q, rng);
        jumps.push(Jump { time: t, from: x, to: y });
        x = y;
    }
    ChainPath::from_parts_unchecked(x0, jumps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(a12: f64, a21: f64) -> ReferenceRates {
        ReferenceRates::try_from(vec![vec![-a12, a12], vec![a21, -a21]]).unwrap()
    }

    #[test]
    fn zero_jump_fraction_matches_exponential_holding() {
        let r = rates(1.0, 1.0);
        let g = TimeGrid::new(1.0, 10).unwrap();
        let n = 100_000u64;
        let quiet = (0..n)
            .filter(|&i| {
                simulate_reference_chain_with(&r, 0, &g, &mut path_rng(4, i, Stream::Chain))
                    .jumps()
                    .is_empty()
            })
            .count();
        let p = (-1.0f64).exp();
        let freq = quiet as f64 / n as f64;
        assert!((freq - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{freq}");
    }

    #[test]
    fn near_absorbing_state_barely_moves() {
        let r = rates(1.0, 1e-9);
        let g = TimeGrid::new(1.0, 10).unwrap();
        let n = 100_000u64;
        let total: usize = (0..n)
            .map(|i| simulate_reference_chain_with(&r, 1, &g, &mut path_rng(5, i, Stream::Chain)).jumps().len())
            .sum();
        assert!((total as f64 / n as f64) < 1e-6);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let r = rates(2.0, 3.0);
        let g = TimeGrid::new(2.0, 10).unwrap();
        let a = simulate_reference_chain(&r, 0, &g, 99);
        assert_eq!(a, simulate_reference_chain(&r, 0, &g, 99));
        assert!(ChainPath::new(a.initial(), a.jumps().to_vec()).is_ok());
    }

    #[test]
    fn zero_reference_rate_is_rejected() {
        assert!(ReferenceRates::try_from(vec![vec![0.0, 0.0], vec![1.0, -1.0]]).is_err());
    }
}
