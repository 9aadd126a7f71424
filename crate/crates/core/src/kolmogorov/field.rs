use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{expm, max_abs_diff, Matrix};
use crate::process::{evaluate_on_grid, FactorPath, IntensityModel, TimeGrid};

/// Solutions of `dZ = -Lambda Z dt` and `dY = Y Lambda dt`, `Z_0 = Y_0 = I`,
/// at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ZyPath {
    pub grid: TimeGrid,
    pub z: Vec<Matrix>,
    pub y: Vec<Matrix>,
}

impl ZyPath {
    pub fn into_field(self) -> TransitionField {
        TransitionField { grid: self.grid, z: self.z, y: self.y }
    }
}

pub fn solve_zy(model: &dyn IntensityModel, factor: &FactorPath, grid: &TimeGrid) -> Result<ZyPath> {
    let lambdas: Vec<Matrix> = evaluate_on_grid(model, factor, grid)?
        .into_iter()
        .map(|g| g.into_matrix())
        .collect();
    Ok(solve_zy_from(&lambdas, grid))
}

/// Exact propagation over constant pieces:
/// `Z_{k+1} = exp(-Lambda_k dt) Z_k`, `Y_{k+1} = Y_k exp(Lambda_k dt)`.
pub fn solve_zy_from(lambdas: &[Matrix], grid: &TimeGrid) -> ZyPath {
    let d = lambdas.first().map_or(0, |m| m.nrows());
    let dt = grid.dt();
    let mut z = Vec::with_capacity(lambdas.len() + 1);
    let mut y = Vec::with_capacity(lambdas.len() + 1);
    z.push(Matrix::identity(d, d));
    y.push(Matrix::identity(d, d));
    for lambda in lambdas {
        let step = lambda * dt;
        let fwd = expm(&step);
        let back = expm(&(-step));
        let zn = &back * z.last().expect("nonempty");
        let yn = y.last().expect("nonempty") * &fwd;
        z.push(zn);
        y.push(yn);
    }
    ZyPath { grid: *grid, z, y }
}

/// Conditional transition matrices `P(s,t) = Z_s Y_t` between grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionField {
    grid: TimeGrid,
    z: Vec<Matrix>,
    y: Vec<Matrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldInvariants {
    /// `max_t |Z_t Y_t - I|`.
    pub inverse_error: f64,
    /// `max_{s<=t} max_x |sum_y p_xy(s,t) - 1|`.
    pub row_sum_error: f64,
    pub min_entry: f64,
    pub max_entry: f64,
    pub min_determinant: f64,
}

impl TransitionField {
    pub fn build(model: &dyn IntensityModel, factor: &FactorPath, grid: &TimeGrid) -> Result<Self> {
        Ok(solve_zy(model, factor, grid)?.into_field())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> usize {
        self.z[0].nrows()
    }

    pub fn z(&self, k: usize) -> &Matrix {
        &self.z[k]
    }

    pub fn y(&self, k: usize) -> &Matrix {
        &self.y[k]
    }

    /// `P(t_s, t_t)` by node index; `P(s,s)` is exactly the identity.
    pub fn p(&self, s: usize, t: usize) -> Result<Matrix> {
        if s > t || t > self.grid.steps() {
            return Err(Error::Scenario(format!("need node indices s <= t <= K, got s={s}, t={t}")));
        }
        if s == t {
            let d = self.states();
            return Ok(Matrix::identity(d, d));
        }
        Ok(&self.z[s] * &self.y[t])
    }

    /// `P(s,t)` by time; both times must be grid nodes.
    pub fn p_at(&self, s: f64, t: f64) -> Result<Matrix> {
        self.p(self.grid.node_index(s)?, self.grid.node_index(t)?)
    }

    pub fn invariants(&self) -> FieldInvariants {
        let d = self.states();
        let id = Matrix::identity(d, d);
        let inverse_error = self
            .z
            .iter()
            .zip(&self.y)
            .map(|(z, y)| max_abs_diff(&(z * y), &id))
            .fold(0.0, f64::max);
        let mut out = FieldInvariants {
            inverse_error,
            row_sum_error: 0.0,
            min_entry: f64::INFINITY,
            max_entry: f64::NEG_INFINITY,
            min_determinant: f64::INFINITY,
        };
        let k = self.grid.steps();
        for s in 0..=k {
            for t in s..=k {
                let p = self.p(s, t).expect("valid indices");
                for row in p.row_iter() {
                    out.row_sum_error = out.row_sum_error.max((row.sum() - 1.0).abs());
                }
                out.min_entry = out.min_entry.min(p.min());
                out.max_entry = out.max_entry.max(p.max());
                out.min_determinant = out.min_determinant.min(p.determinant());
            }
        }
        out
    }

    /// `max |P(s,u) P(u,t) - P(s,t)|` over all node triples `s <= u <= t`.
    pub fn chapman_kolmogorov_error(&self) -> f64 {
        let k = self.grid.steps();
        let mut worst = 0.0_f64;
        for s in 0..=k {
            for u in s..=k {
                let psu = self.p(s, u).expect("valid");
                for t in u..=k {
                    let lhs = &psu * self.p(u, t).expect("valid");
                    worst = worst.max(max_abs_diff(&lhs, &self.p(s, t).expect("valid")));
                }
            }
        }
        worst
    }
}
