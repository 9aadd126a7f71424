use serde::Serialize;

use super::atoms::{compensated_sum, enumerate_atoms, Measure};
use super::scenario::DiscreteScenario;
use crate::diagnostics::log_log_slope;
use crate::error::Result;
use crate::linalg::{expm, Matrix};

/// `P(X_K = y | X_0 = x)` by enumeration.
pub fn discrete_marginal(sc: &DiscreteScenario, x: usize, y: usize) -> Result<f64> {
    let mut start = sc.clone();
    start.initial_law = (0..sc.states).map(|i| if i == x { 1.0 } else { 0.0 }).collect();
    start.planted_violation = None;
    let table = enumerate_atoms(&start, Measure::P)?;
    Ok(compensated_sum(table.atoms().filter(|a| a.state(sc.steps) == y).map(|a| a.prob)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub steps: usize,
    pub step_size: f64,
    pub discrete: f64,
    pub exact: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub points: Vec<ConvergencePoint>,
    /// Log-log slope of error against step size.
    pub slope: f64,
}

/// Discrete marginal against the `exp(Lambda T)` entry for a constant
/// intensity, refining `K` with `K Delta = horizon` fixed.
pub fn convergence_study(rates: &Matrix, horizon: f64, steps: &[usize], x: usize, y: usize) -> Result<ConvergenceStudy> {
    let exact = expm(&(rates * horizon))[(x, y)];
    let d = rates.nrows();
    let points = steps
        .iter()
        .map(|&k| {
            let dt = horizon / k as f64;
            let sc = DiscreteScenario::constant("convergence", rates.clone(), k, dt, vec![1.0 / d as f64; d])?;
            let discrete = discrete_marginal(&sc, x, y)?;
            Ok(ConvergencePoint { steps: k, step_size: dt, discrete, exact, error: (discrete - exact).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = log_log_slope(
        &points.iter().map(|p| p.step_size).collect::<Vec<_>>(),
        &points.iter().map(|p| p.error).collect::<Vec<_>>(),
    );
    Ok(ConvergenceStudy { points, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;

    #[test]
    fn euler_scheme_is_first_order() {
        let rates = from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]);
        let study = convergence_study(&rates, 0.2, &[2, 4, 8], 0, 0).unwrap();
        // closed form: (1 + (1 - 2 Delta)^K) / 2
        for p in &study.points {
            let closed = 0.5 * (1.0 + (1.0 - 2.0 * p.step_size).powi(p.steps as i32));
            assert!((p.discrete - closed).abs() < 1e-14);
        }
        assert!((study.slope - 1.0).abs() < 0.3, "{}", study.slope);
    }
}
