use rayon::prelude::*;
use serde::Serialize;

use super::dictionary::TestFunctionDictionary;
use super::martingale::{residual_m, NodePair};
use super::report::MartingaleTestReport;
use crate::error::{Error, Result};
use crate::process::{evaluate_on_grid, IntensityModel, TimeGrid};
use crate::simulate::WeightedPath;
use crate::simulate::WeightedEnsemble;

/// Integrals below this are treated as zero.
const VANISH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// `max |int_0^T (Lambda_u - Lambda'_u)^T H_u du|` over paths with positive weight.
    pub max_abs_integral: f64,
    /// Same maximum over every simulated path, including zero-weight ones.
    pub max_abs_integral_all_paths: f64,
    /// Positive-weight paths on which the integral does not vanish.
    pub nonzero_paths: usize,
    pub positive_weight_paths: usize,
    pub equivalent: bool,
    /// `M` rescored under the alternative model when the integral vanishes.
    pub residual_m: Option<MartingaleTestReport>,
}

/// `int_0^T (Lambda_u - Lambda'_u)^T H_u du` along one path (one entry per state).
pub fn pathwise_intensity_gap(
    path: &WeightedPath,
    model: &dyn IntensityModel,
    alt: &dyn IntensityModel,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    let a = evaluate_on_grid(model, &path.factor, grid)?;
    let b = evaluate_on_grid(alt, &path.factor, grid)?;
    let d = model.states();
    let mut gap = vec![0.0; d];
    for (k, (la, lb)) in a.iter().zip(&b).enumerate() {
        for (s, e, x) in path.chain.segments(grid.node(k), grid.node(k + 1)) {
            for (y, g) in gap.iter_mut().enumerate() {
                *g += (la.rate(x, y) - lb.rate(x, y)) * (e - s);
            }
        }
    }
    Ok(gap)
}

/// Checks whether `alt` is equivalent to `model` along the chain: the
/// integrated difference of the rows actually occupied must vanish.
pub fn equivalence_check(
    model: &dyn IntensityModel,
    alt: &dyn IntensityModel,
    ensemble: &WeightedEnsemble,
    dict: &TestFunctionDictionary,
    pairs: &[NodePair],
) -> Result<EquivalenceReport> {
    if model.states() != alt.states() || model.states() != ensemble.states {
        return Err(Error::Mismatch("models and ensemble disagree on the state count".into()));
    }
    let grid = ensemble.grid;
    let gaps: Vec<(f64, f64)> = ensemble
        .paths
        .par_iter()
        .map(|p| {
            let g = pathwise_intensity_gap(p, model, alt, &grid)?;
            Ok((p.weight, g.iter().fold(0.0_f64, |m, v| m.max(v.abs()))))
        })
        .collect::<Result<_>>()?;
    let positive: Vec<f64> = gaps.iter().filter(|(w, _)| *w > 0.0).map(|(_, g)| *g).collect();
    let max_abs_integral = positive.iter().copied().fold(0.0, f64::max);
    let equivalent = max_abs_integral <= VANISH_TOL;
    Ok(EquivalenceReport {
        max_abs_integral,
        max_abs_integral_all_paths: gaps.iter().map(|(_, g)| *g).fold(0.0, f64::max),
        nonzero_paths: positive.iter().filter(|&&g| g > VANISH_TOL).count(),
        positive_weight_paths: positive.len(),
        equivalent,
        residual_m: if equivalent { Some(residual_m(ensemble, alt, dict, pairs)?) } else { None },
    })
}
