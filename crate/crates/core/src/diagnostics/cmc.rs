use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{z_score, Z_THRESHOLD};
use crate::error::{Error, Result};
use crate::kolmogorov::solve_zy_from;
use crate::process::{evaluate_on_grid, IntensityModel};
use crate::simulate::WeightedEnsemble;

/// Cells with fewer paths than this are reported but not scored.
pub const MIN_CELL_PATHS: usize = 30;

/// Partition of paths by factor information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorBucket {
    All,
    /// Four buckets: sign of `f(t)` and direction of `f(t1) - f(t)`.
    SignAndMove { component: usize },
}

impl FactorBucket {
    fn bucket(&self, now: &[f64], later: &[f64]) -> usize {
        match self {
            Self::All => 0,
            Self::SignAndMove { component } => {
                2 * usize::from(now[*component] > 0.0) + usize::from(later[*component] > now[*component])
            }
        }
    }

    fn label(&self, b: usize) -> String {
        match self {
            Self::All => "all".into(),
            Self::SignAndMove { component } => format!(
                "f{component}(t){}0,move{}",
                if b >= 2 { ">" } else { "<=" },
                if b % 2 == 1 { "up" } else { "down" }
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmcCell {
    /// State at `t` (1-based).
    pub state: usize,
    /// State at the extra past node (1-based), for the refined variant.
    pub past_state: Option<usize>,
    pub bucket: String,
    /// Target state at `t1` (1-based).
    pub target: usize,
    pub paths: usize,
    pub empirical: f64,
    pub field: f64,
    pub diff: f64,
    pub se: f64,
    pub z: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmcReport {
    pub t: f64,
    pub t1: f64,
    pub past: Option<f64>,
    pub n_paths: usize,
    pub ess: f64,
    pub threshold: f64,
    pub max_abs_z: f64,
    pub max_abs_diff: f64,
    pub empty_cells: usize,
    pub pass: bool,
    pub cells: Vec<CmcCell>,
}

struct PathFeatures {
    weight: f64,
    state: usize,
    past: Option<usize>,
    bucket: usize,
    later: usize,
    field_row: Vec<f64>,
}

#[derive(Default, Clone)]
struct Acc {
    paths: usize,
    mass: f64,
    hit: f64,
    pred: f64,
    g2: f64,
}

/// Compares `P(X_{t1} = y | X_t = x, bucket)` estimated from weighted
/// frequencies with the bucket average of the field entry `p_xy(t, t1)`.
/// When `past` is given, every cell is additionally split by the state at
/// that earlier node; under the conditional Markov property the extra
/// information must not move the frequencies away from the field.
pub fn cmc_conditional_test(
    ensemble: &WeightedEnsemble,
    model: &dyn IntensityModel,
    t: usize,
    t1: usize,
    past: Option<usize>,
    targets: &[usize],
    buckets: FactorBucket,
) -> Result<CmcReport> {
    let grid = ensemble.grid;
    if !(t < t1 && t1 <= grid.steps()) || past.is_some_and(|p| p >= t) {
        return Err(Error::Scenario(format!("need past < t < t1 <= K, got {past:?}, {t}, {t1}")));
    }
    if model.states() != ensemble.states {
        return Err(Error::Mismatch("model and ensemble state counts differ".into()));
    }
    let d = ensemble.states;
    let features: Vec<PathFeatures> = ensemble
        .paths
        .par_iter()
        .filter(|p| p.weight > 0.0)
        .map(|p| {
            let lambdas: Vec<_> = evaluate_on_grid(model, &p.factor, &grid)?
                .into_iter()
                .map(|g| g.into_matrix())
                .collect();
            let zy = solve_zy_from(&lambdas, &grid);
            let state = p.chain.state_at(grid.node(t));
            let row = zy.z[t].row(state) * &zy.y[t1];
            Ok(PathFeatures {
                weight: p.weight,
                state,
                past: past.map(|k| p.chain.state_at(grid.node(k))),
                bucket: buckets.bucket(p.factor.at(t), p.factor.at(t1)),
                later: p.chain.state_at(grid.node(t1)),
                field_row: row.iter().copied().collect(),
            })
        })
        .collect::<Result<_>>()?;

    let n_buckets = match buckets {
        FactorBucket::All => 1,
        FactorBucket::SignAndMove { .. } => 4,
    };
    // key: (state, past state or d for "any", bucket, target)
    let mut cells: BTreeMap<(usize, usize, usize, usize), Acc> = BTreeMap::new();
    let variants: Vec<Option<usize>> = match past {
        None => vec![None],
        Some(_) => std::iter::once(None).chain((0..d).map(Some)).collect(),
    };
    for x in 0..d {
        for v in &variants {
            for b in 0..n_buckets {
                for &y in targets {
                    cells.insert((x, v.unwrap_or(d), b, y), Acc::default());
                }
            }
        }
    }
    // two passes: the cell difference first, then its delta-method variance
    for f in &features {
        for key_past in [d, f.past.unwrap_or(usize::MAX)] {
            if key_past == usize::MAX {
                continue;
            }
            for &y in targets {
                if let Some(acc) = cells.get_mut(&(f.state, key_past, f.bucket, y)) {
                    acc.paths += 1;
                    acc.mass += f.weight;
                    acc.hit += f.weight * f64::from(u8::from(f.later == y));
                    acc.pred += f.weight * f.field_row[y];
                }
            }
        }
    }
    for f in &features {
        for key_past in [d, f.past.unwrap_or(usize::MAX)] {
            if key_past == usize::MAX {
                continue;
            }
            for &y in targets {
                if let Some(acc) = cells.get_mut(&(f.state, key_past, f.bucket, y)) {
                    let diff = (acc.hit - acc.pred) / acc.mass;
                    let r = f.weight * (f64::from(u8::from(f.later == y)) - f.field_row[y] - diff);
                    acc.g2 += r * r;
                }
            }
        }
    }

    let mut out = Vec::with_capacity(cells.len());
    let mut max_abs_z = 0.0_f64;
    let mut max_abs_diff = 0.0_f64;
    let mut empty = 0;
    for ((x, v, b, y), acc) in cells {
        let past_state = (v < d).then_some(v + 1);
        let mut cell = CmcCell {
            state: x + 1,
            past_state,
            bucket: buckets.label(b),
            target: y + 1,
            paths: acc.paths,
            empirical: f64::NAN,
            field: f64::NAN,
            diff: f64::NAN,
            se: f64::NAN,
            z: None,
            status: "ok".into(),
        };
        if acc.paths == 0 {
            cell.status = "empty".into();
            empty += 1;
        } else {
            cell.empirical = acc.hit / acc.mass;
            cell.field = acc.pred / acc.mass;
            cell.diff = cell.empirical - cell.field;
            cell.se = acc.g2.sqrt() / acc.mass;
            if acc.paths < MIN_CELL_PATHS {
                cell.status = "sparse".into();
            } else {
                let z = z_score(cell.diff, cell.se);
                cell.z = Some(z);
                max_abs_z = max_abs_z.max(z.abs());
                max_abs_diff = max_abs_diff.max(cell.diff.abs());
            }
        }
        out.push(cell);
    }
    Ok(CmcReport {
        t: grid.node(t),
        t1: grid.node(t1),
        past: past.map(|k| grid.node(k)),
        n_paths: ensemble.len(),
        ess: ensemble.ess(),
        threshold: Z_THRESHOLD,
        max_abs_z,
        max_abs_diff,
        empty_cells: empty,
        pass: max_abs_z < Z_THRESHOLD,
        cells: out,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [1e3, 1e4, 1e5];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn bucket_labels() {
        let b = FactorBucket::SignAndMove { component: 0 };
        assert_eq!(b.bucket(&[1.0], &[2.0]), 3);
        assert_eq!(b.bucket(&[-1.0], &[-2.0]), 0);
        assert_eq!(b.label(3), "f0(t)>0,moveup");
    }
}
