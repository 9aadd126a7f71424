use serde::Serialize;

use super::field::TransitionField;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, Matrix};
use crate::process::{evaluate_on_grid, FactorPath, IntensityModel};

/// Largest violation of the integral Kolmogorov equations over node pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KolmogorovResidual {
    /// `max |P(v,t) - I - int_v^t Lambda_u P(u,t) du|`.
    pub backward: f64,
    /// `max |P(v,t) - I - int_v^t P(v,u) Lambda_u du|`.
    pub forward: f64,
}

/// Checks a field against an intensity model. Integrals use the model's
/// value on each constant piece and the trapezoid rule on the field's node
/// values, so the residual is quadrature error (`O(dt^2)`) when the model
/// is the one that generated the field, and `O(1)` when it is not.
pub fn kolmogorov_residual(
    field: &TransitionField,
    model: &dyn IntensityModel,
    factor: &FactorPath,
) -> Result<KolmogorovResidual> {
    let grid = *field.grid();
    let lambdas: Vec<Matrix> = evaluate_on_grid(model, factor, &grid)?
        .into_iter()
        .map(|g| g.into_matrix())
        .collect();
    if lambdas.first().map(|m| m.nrows()) != Some(field.states()) {
        return Err(Error::Mismatch("model and field have different state counts".into()));
    }
    let k = grid.steps();
    let half = grid.dt() / 2.0;
    let d = field.states();
    let id = Matrix::identity(d, d);
    let mut out = KolmogorovResidual { backward: 0.0, forward: 0.0 };

    for t in 0..=k {
        // backward: integrate v from t down to 0
        let mut integral = Matrix::zeros(d, d);
        let mut p_right = field.p(t, t)?;
        for v in (0..t).rev() {
            let p_left = field.p(v, t)?;
            integral += &lambdas[v] * (&p_left + &p_right) * half;
            out.backward = out.backward.max(max_abs(&(&p_left - &id - &integral)));
            p_right = p_left;
        }
    }
    for v in 0..=k {
        let mut integral = Matrix::zeros(d, d);
        let mut p_left = field.p(v, v)?;
        for t in (v + 1)..=k {
            let p_right = field.p(v, t)?;
            integral += (&p_left + &p_right) * &lambdas[t - 1] * half;
            out.forward = out.forward.max(max_abs(&(&p_right - &id - &integral)));
            p_left = p_right;
        }
    }
    Ok(out)
}
