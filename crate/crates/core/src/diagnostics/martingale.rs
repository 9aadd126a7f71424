use serde::{Deserialize, Serialize};

use super::dictionary::TestFunctionDictionary;
use super::report::{orthogonality_report, MartingaleTestReport};
use crate::error::{Error, Result};
use crate::kolmogorov::solve_zy_from;
use crate::linalg::Matrix;
use crate::process::{evaluate_on_grid, IntensityModel, TimeGrid};
use crate::simulate::{WeightedEnsemble, WeightedPath};

/// Increment `[t_s, t_t]` by node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePair {
    pub s: usize,
    pub t: usize,
}

impl NodePair {
    pub fn new(s: usize, t: usize) -> Self {
        Self { s, t }
    }

    /// Consecutive pairs of `parts + 1` roughly equally spaced nodes.
    pub fn consecutive(grid: &TimeGrid, parts: usize) -> Vec<Self> {
        let k = grid.steps();
        let nodes: Vec<usize> = (0..=parts).map(|i| (i * k + parts / 2) / parts).collect();
        nodes.windows(2).filter(|w| w[0] < w[1]).map(|w| Self::new(w[0], w[1])).collect()
    }
}

fn check_pairs(pairs: &[NodePair], last: usize) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Scenario("no node pairs to test".into()));
    }
    for p in pairs {
        if p.s > p.t || p.t > last {
            return Err(Error::Scenario(format!("invalid node pair ({}, {}) for last node {last}", p.s, p.t)));
        }
    }
    Ok(())
}

fn check_model(ensemble: &WeightedEnsemble, model: &dyn IntensityModel) -> Result<()> {
    if model.states() != ensemble.states {
        return Err(Error::Mismatch(format!(
            "model has {} states, ensemble has {}",
            model.states(),
            ensemble.states
        )));
    }
    Ok(())
}

fn lambdas(model: &dyn IntensityModel, path: &WeightedPath, grid: &TimeGrid) -> Result<Vec<Matrix>> {
    Ok(evaluate_on_grid(model, &path.factor, grid)?
        .into_iter()
        .map(|g| g.into_matrix())
        .collect())
}

/// `int_0^{t_k} Lambda_u^T H_u du` at every node: row `k`, component `y`
/// is the accumulated `lambda^{X_u, y}`.
fn compensators(path: &WeightedPath, lambdas: &[Matrix], grid: &TimeGrid, d: usize) -> Vec<Vec<f64>> {
    let mut acc = vec![0.0; d];
    let mut out = Vec::with_capacity(lambdas.len() + 1);
    out.push(acc.clone());
    for (k, lambda) in lambdas.iter().enumerate() {
        for (a, b, x) in path.chain.segments(grid.node(k), grid.node(k + 1)) {
            for (y, slot) in acc.iter_mut().enumerate() {
                *slot += lambda[(x, y)] * (b - a);
            }
        }
        out.push(acc.clone());
    }
    out
}

fn state_labels(d: usize) -> Vec<String> {
    (1..=d).map(|x| x.to_string()).collect()
}

/// Tests `M^x_t = H^x_t - int_0^t (Lambda_u^T H_u)^x du` for every state `x`.
pub fn residual_m(
    ensemble: &WeightedEnsemble,
    model: &dyn IntensityModel,
    dict: &TestFunctionDictionary,
    pairs: &[NodePair],
) -> Result<MartingaleTestReport> {
    check_model(ensemble, model)?;
    let grid = ensemble.grid;
    check_pairs(pairs, grid.steps())?;
    let d = ensemble.states;
    orthogonality_report("M", ensemble, dict, pairs, &state_labels(d), |path| {
        let comp = compensators(path, &lambdas(model, path, &grid)?, &grid, d);
        Ok((0..=grid.steps())
            .map(|k| {
                let x = path.chain.state_at(grid.node(k));
                (0..d).map(|y| f64::from(u8::from(x == y)) - comp[k][y]).collect()
            })
            .collect())
    })
}

/// Tests `K^{xy}_t = H^{xy}_t - int_0^t H^x_u lambda^{xy}_u du` for one pair `x != y`.
pub fn residual_k(
    ensemble: &WeightedEnsemble,
    model: &dyn IntensityModel,
    x: usize,
    y: usize,
    dict: &TestFunctionDictionary,
    pairs: &[NodePair],
) -> Result<MartingaleTestReport> {
    if x == y {
        return Err(Error::SameState(x));
    }
    check_model(ensemble, model)?;
    let d = ensemble.states;
    if x >= d || y >= d {
        return Err(Error::StateOutOfRange { state: x.max(y), states: d });
    }
    let grid = ensemble.grid;
    check_pairs(pairs, grid.steps())?;
    let label = vec![format!("{}->{}", x + 1, y + 1)];
    orthogonality_report("K", ensemble, dict, pairs, &label, |path| {
        let lam = lambdas(model, path, &grid)?;
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(grid.steps() + 1);
        out.push(vec![0.0]);
        for (k, lambda) in lam.iter().enumerate() {
            for (a, b, z) in path.chain.segments(grid.node(k), grid.node(k + 1)) {
                if z == x {
                    acc += lambda[(x, y)] * (b - a);
                }
            }
            let count = path.chain.transition_count(x, y, grid.node(k + 1))? as f64;
            out.push(vec![count - acc]);
        }
        Ok(out)
    })
}

/// Tests `L_t = Z_t^T H_t` where `dZ = -Lambda Z dt`, `Z_0 = I`.
pub fn residual_l(
    ensemble: &WeightedEnsemble,
    model: &dyn IntensityModel,
    dict: &TestFunctionDictionary,
    pairs: &[NodePair],
) -> Result<MartingaleTestReport> {
    check_model(ensemble, model)?;
    let grid = ensemble.grid;
    check_pairs(pairs, grid.steps())?;
    let d = ensemble.states;
    orthogonality_report("L", ensemble, dict, pairs, &state_labels(d), |path| {
        let zy = solve_zy_from(&lambdas(model, path, &grid)?, &grid);
        Ok((0..=grid.steps())
            .map(|k| {
                let x = path.chain.state_at(grid.node(k));
                (0..d).map(|c| zy.z[k][(x, c)]).collect()
            })
            .collect())
    })
}

/// Tests `N^t_s = P(s,t)^T H_s`, `s <= t`, for the target node `t`.
pub fn residual_n(
    ensemble: &WeightedEnsemble,
    model: &dyn IntensityModel,
    target: usize,
    dict: &TestFunctionDictionary,
    pairs: &[NodePair],
) -> Result<MartingaleTestReport> {
    check_model(ensemble, model)?;
    let grid = ensemble.grid;
    if target > grid.steps() {
        return Err(Error::Scenario(format!("target node {target} beyond the grid")));
    }
    check_pairs(pairs, target)?;
    let d = ensemble.states;
    orthogonality_report("N", ensemble, dict, pairs, &state_labels(d), |path| {
        let zy = solve_zy_from(&lambdas(model, path, &grid)?, &grid);
        let y_t = &zy.y[target];
        Ok((0..=grid.steps())
            .map(|s| {
                if s > target {
                    return vec![f64::NAN; d];
                }
                let x = path.chain.state_at(grid.node(s));
                let row = if s == target {
                    Matrix::identity(d, d).row(x).into_owned()
                } else {
                    (zy.z[s].row(x) * y_t).into_owned()
                };
                row.iter().copied().collect()
            })
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consecutive_pairs_cover_grid() {
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let pairs = NodePair::consecutive(&grid, 4);
        assert_eq!(
            pairs,
            vec![NodePair::new(0, 5), NodePair::new(5, 10), NodePair::new(10, 15), NodePair::new(15, 20)]
        );
        let coarse = TimeGrid::new(1.0, 3).unwrap();
        assert!(NodePair::consecutive(&coarse, 4).iter().all(|p| p.s < p.t));
    }
}
