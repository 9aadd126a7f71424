use serde::{Deserialize, Serialize};

use super::factor::{FactorHistory, FactorPath};
use super::generator::{fill_diagonal, validate_generator, GeneratorMatrix};
use super::grid::TimeGrid;
use crate::error::{Error, Result};
use crate::linalg::{from_rows, to_rows, Matrix};

/// An adapted map from factor history to an intensity matrix.
///
/// Implementations only ever see a [`FactorHistory`] truncated at the
/// current node, and the value they return is held constant until the next
/// node. The diagonal of the returned matrix is taken as given and checked
/// by [`evaluate_intensity`].
pub trait IntensityModel: Send + Sync {
    fn states(&self) -> usize;

    /// Upper bound on every off-diagonal rate the model can produce.
    fn lambda_max(&self) -> f64;

    fn rates(&self, history: &FactorHistory<'_>) -> Result<Matrix>;
}

/// Evaluates `model` at time `t` on the factor path truncated at the last
/// node `<= t`, and validates the result.
pub fn evaluate_intensity(
    model: &dyn IntensityModel,
    factor: &FactorPath,
    grid: &TimeGrid,
    t: f64,
) -> Result<GeneratorMatrix> {
    let k = grid.node_at_or_before(t)?;
    evaluate_at_node(model, factor, grid, k)
}

pub(crate) fn evaluate_at_node(
    model: &dyn IntensityModel,
    factor: &FactorPath,
    grid: &TimeGrid,
    k: usize,
) -> Result<GeneratorMatrix> {
    if factor.nodes() != grid.steps() + 1 {
        return Err(Error::Scenario(format!(
            "factor path has {} nodes, grid has {}",
            factor.nodes(),
            grid.steps() + 1
        )));
    }
    let history = factor.history(k, grid.node(k));
    let m = model.rates(&history)?;
    if m.nrows() != model.states() {
        return Err(Error::Model(format!(
            "model returned a {}x{} matrix for {} states",
            m.nrows(),
            m.ncols(),
            model.states()
        )));
    }
    let report = validate_generator(&m);
    if !report.is_ok() {
        return Err(Error::Model(format!("at node {k}: {:?}", report.violations)));
    }
    let g = GeneratorMatrix::new(m)?;
    let bound = model.lambda_max();
    if g.max_rate() > bound * (1.0 + 1e-12) {
        return Err(Error::Model(format!(
            "rate {} exceeds declared bound {bound} at node {k}",
            g.max_rate()
        )));
    }
    Ok(g)
}

/// Intensity on every grid interval `[t_k, t_{k+1})`, `k = 0..K`.
pub fn evaluate_on_grid(
    model: &dyn IntensityModel,
    factor: &FactorPath,
    grid: &TimeGrid,
) -> Result<Vec<GeneratorMatrix>> {
    (0..grid.steps())
        .map(|k| evaluate_at_node(model, factor, grid, k))
        .collect()
}

/// A generator matrix as it appears in scenario files: full rows, with the
/// diagonal equal to minus the off-diagonal row sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct RateMatrix(Matrix);

impl TryFrom<Vec<Vec<f64>>> for RateMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Scenario("rate matrix must be square and nonempty".into()));
        }
        let m = from_rows(&rows);
        let report = validate_generator(&m);
        if !report.is_ok() {
            return Err(Error::Scenario(format!("invalid rate matrix: {:?}", report.violations)));
        }
        Ok(Self(m))
    }
}

impl From<RateMatrix> for Vec<Vec<f64>> {
    fn from(m: RateMatrix) -> Self {
        to_rows(&m.0)
    }
}

impl RateMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        Self::try_from(to_rows(&m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn max_rate(&self) -> f64 {
        let d = self.dim();
        let mut best = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    best = best.max(self.0[(i, j)]);
                }
            }
        }
        best
    }
}

/// Intensity models that can be described in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensitySpec {
    /// Deterministic, time-homogeneous rates.
    Constant { rates: RateMatrix },
    /// `above` when factor component exceeds `threshold`, else `below`.
    Threshold {
        component: usize,
        threshold: f64,
        below: RateMatrix,
        above: RateMatrix,
    },
    /// Off-diagonal rates interpolate between `low` and `high` through
    /// a logistic function of `slope * (f - center)`.
    Logistic {
        component: usize,
        #[serde(default)]
        center: f64,
        slope: f64,
        low: RateMatrix,
        high: RateMatrix,
    },
    /// The factor component is a regime label `0..regimes.len()`.
    Regime {
        component: usize,
        regimes: Vec<RateMatrix>,
    },
    /// Deterministic switch at the first node `>= switch_time`.
    TimeSwitch {
        switch_time: f64,
        before: RateMatrix,
        after: RateMatrix,
    },
    /// Every off-diagonal rate of `inner` multiplied by `scale`.
    Scaled {
        scale: f64,
        inner: Box<IntensitySpec>,
    },
}

impl IntensitySpec {
    pub fn constant(m: Matrix) -> Result<Self> {
        Ok(Self::Constant { rates: RateMatrix::new(m)? })
    }

    pub fn scaled(self, scale: f64) -> Self {
        Self::Scaled { scale, inner: Box::new(self) }
    }

    /// Checks internal consistency for `d` states and an `m`-dimensional factor.
    pub fn validate(&self, d: usize, factor_dim: usize) -> Result<()> {
        let check = |r: &RateMatrix| {
            if r.dim() == d {
                Ok(())
            } else {
                Err(Error::Scenario(format!("rate matrix is {}x{0}, expected {d}x{d}", r.dim())))
            }
        };
        let check_component = |c: usize| {
            if c < factor_dim {
                Ok(())
            } else {
                Err(Error::Scenario(format!(
                    "factor component {c} out of range for dimension {factor_dim}"
                )))
            }
        };
        match self {
            Self::Constant { rates } => check(rates),
            Self::Threshold { component, threshold, below, above } => {
                check_component(*component)?;
                if !threshold.is_finite() {
                    return Err(Error::Scenario("threshold must be finite".into()));
                }
                check(below)?;
                check(above)
            }
            Self::Logistic { component, center, slope, low, high } => {
                check_component(*component)?;
                if !(center.is_finite() && slope.is_finite()) {
                    return Err(Error::Scenario("logistic parameters must be finite".into()));
                }
                check(low)?;
                check(high)
            }
            Self::Regime { component, regimes } => {
                check_component(*component)?;
                if regimes.is_empty() {
                    return Err(Error::Scenario("regime model needs at least one regime".into()));
                }
                regimes.iter().try_for_each(check)
            }
            Self::TimeSwitch { before, after, .. } => {
                check(before)?;
                check(after)
            }
            Self::Scaled { scale, inner } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(Error::Scenario(format!("scale must be finite and >= 0, got {scale}")));
                }
                inner.validate(d, factor_dim)
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Constant { rates } => rates.dim(),
            Self::Threshold { below, .. } => below.dim(),
            Self::Logistic { low, .. } => low.dim(),
            Self::Regime { regimes, .. } => regimes[0].dim(),
            Self::TimeSwitch { before, .. } => before.dim(),
            Self::Scaled { inner, .. } => inner.dim(),
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl IntensityModel for IntensitySpec {
    fn states(&self) -> usize {
        self.dim()
    }

    fn lambda_max(&self) -> f64 {
        match self {
            Self::Constant { rates } => rates.max_rate(),
            Self::Threshold { below, above, .. } => below.max_rate().max(above.max_rate()),
            Self::Logistic { low, high, .. } => low.max_rate().max(high.max_rate()),
            Self::Regime { regimes, .. } => regimes.iter().map(RateMatrix::max_rate).fold(0.0, f64::max),
            Self::TimeSwitch { before, after, .. } => before.max_rate().max(after.max_rate()),
            Self::Scaled { scale, inner } => scale * inner.lambda_max(),
        }
    }

    fn rates(&self, history: &FactorHistory<'_>) -> Result<Matrix> {
        match self {
            Self::Constant { rates } => Ok(rates.0.clone()),
            Self::Threshold { component, threshold, below, above } => {
                let f = history.latest()[*component];
                Ok(if f > *threshold { above.0.clone() } else { below.0.clone() })
            }
            Self::Logistic { component, center, slope, low, high } => {
                let w = logistic(slope * (history.latest()[*component] - center));
                let mut m = &low.0 * (1.0 - w) + &high.0 * w;
                fill_diagonal(&mut m);
                Ok(m)
            }
            Self::Regime { component, regimes } => {
                let f = history.latest()[*component];
                let idx = f.round();
                if idx < 0.0 || idx as usize >= regimes.len() || (f - idx).abs() > 1e-9 {
                    return Err(Error::Model(format!("factor value {f} is not a regime label")));
                }
                Ok(regimes[idx as usize].0.clone())
            }
            Self::TimeSwitch { switch_time, before, after } => Ok(if history.time() < *switch_time {
                before.0.clone()
            } else {
                after.0.clone()
            }),
            Self::Scaled { scale, inner } => {
                let mut m = inner.rates(history)? * *scale;
                fill_diagonal(&mut m);
                Ok(m)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rm(rows: &[&[f64]]) -> RateMatrix {
        RateMatrix::try_from(rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn constant_model_returns_its_matrix() {
        let model = IntensitySpec::Constant { rates: rm(&[&[-1.0, 1.0], &[0.0, 0.0]]) };
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let f = FactorPath::constant(&[0.0], 11);
        for t in [0.0, 0.37, 1.0] {
            let g = evaluate_intensity(&model, &f, &grid, t).unwrap();
            assert_eq!(g.matrix(), &from_rows(&[vec![-1.0, 1.0], vec![0.0, 0.0]]));
        }
    }

    #[test]
    fn threshold_rule_reads_current_factor() {
        // lambda12 = 1 + 1{f > 0}
        let model = IntensitySpec::Threshold {
            component: 0,
            threshold: 0.0,
            below: rm(&[&[-1.0, 1.0], &[0.0, 0.0]]),
            above: rm(&[&[-2.0, 2.0], &[0.0, 0.0]]),
        };
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let f = FactorPath::constant(&[1.0], 11);
        let g = evaluate_intensity(&model, &f, &grid, 0.5).unwrap();
        assert_eq!(g.rate(0, 1), 2.0);
    }

    struct PeeksAhead;

    impl IntensityModel for PeeksAhead {
        fn states(&self) -> usize {
            2
        }
        fn lambda_max(&self) -> f64 {
            10.0
        }
        fn rates(&self, history: &FactorHistory<'_>) -> Result<Matrix> {
            let next = history.node(history.last_node() + 1)?;
            Ok(from_rows(&[vec![-next[0].abs(), next[0].abs()], vec![0.0, 0.0]]))
        }
    }

    #[test]
    fn reading_a_future_node_is_an_adaptedness_error() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let f = FactorPath::constant(&[1.0], 5);
        let err = evaluate_intensity(&PeeksAhead, &f, &grid, 0.5).unwrap_err();
        assert!(matches!(err, Error::Adaptedness { requested: 3, available: 2 }));
    }

    #[test]
    fn time_outside_horizon_is_rejected() {
        let model = IntensitySpec::Constant { rates: rm(&[&[0.0, 0.0], &[0.0, 0.0]]) };
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let f = FactorPath::constant(&[1.0], 5);
        assert!(matches!(
            evaluate_intensity(&model, &f, &grid, 1.5),
            Err(Error::TimeOutOfRange { .. })
        ));
    }

    struct Broken;

    impl IntensityModel for Broken {
        fn states(&self) -> usize {
            2
        }
        fn lambda_max(&self) -> f64 {
            1.0
        }
        fn rates(&self, _: &FactorHistory<'_>) -> Result<Matrix> {
            Ok(from_rows(&[vec![-1.0, 0.5], vec![0.0, 0.0]]))
        }
    }

    #[test]
    fn invalid_model_output_is_a_model_error() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let f = FactorPath::constant(&[1.0], 5);
        assert!(matches!(evaluate_intensity(&Broken, &f, &grid, 0.0), Err(Error::Model(_))));
    }

    #[test]
    fn scaled_model_doubles_off_diagonals() {
        let base = IntensitySpec::Constant { rates: rm(&[&[-1.0, 1.0], &[0.5, -0.5]]) };
        assert_eq!(base.clone().scaled(2.0).lambda_max(), 2.0);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let f = FactorPath::constant(&[0.0], 5);
        let g = evaluate_intensity(&base.scaled(2.0), &f, &grid, 0.0).unwrap();
        assert_eq!(g.matrix(), &from_rows(&[vec![-2.0, 2.0], vec![1.0, -1.0]]));
    }

    #[test]
    fn rate_matrix_json_rejects_invalid_generators() {
        let bad: std::result::Result<RateMatrix, _> = serde_json::from_str("[[-1, 0.5], [1, -1]]");
        assert!(bad.is_err());
    }

    fn logistic_model() -> IntensitySpec {
        IntensitySpec::Logistic {
            component: 0,
            center: 0.0,
            slope: 1.5,
            low: rm(&[&[-0.5, 0.3, 0.2], &[0.4, -0.6, 0.2], &[0.1, 0.1, -0.2]]),
            high: rm(&[&[-2.5, 2.0, 0.5], &[1.0, -1.5, 0.5], &[0.9, 1.1, -2.0]]),
        }
    }

    proptest! {
        #[test]
        fn outputs_are_generators_at_every_node(values in proptest::collection::vec(-5.0f64..5.0, 9)) {
            let grid = TimeGrid::new(2.0, 8).unwrap();
            let f = FactorPath::new(1, values, vec![]).unwrap();
            let model = logistic_model();
            for k in 0..=8 {
                let g = evaluate_intensity(&model, &f, &grid, grid.node(k)).unwrap();
                prop_assert!(validate_generator(g.matrix()).is_ok());
                prop_assert!(g.max_rate() <= model.lambda_max());
            }
        }

        #[test]
        fn output_ignores_factor_values_after_t(
            values in proptest::collection::vec(-5.0f64..5.0, 9),
            noise in proptest::collection::vec(-5.0f64..5.0, 9),
            k in 0usize..9,
        ) {
            let grid = TimeGrid::new(2.0, 8).unwrap();
            let mut other = values.clone();
            other[k + 1..9].copy_from_slice(&noise[k + 1..9]);
            let f = FactorPath::new(1, values, vec![]).unwrap();
            let g = FactorPath::new(1, other, vec![]).unwrap();
            let model = logistic_model();
            let t = grid.node(k);
            prop_assert_eq!(
                evaluate_intensity(&model, &f, &grid, t).unwrap(),
                evaluate_intensity(&model, &g, &grid, t).unwrap()
            );
        }
    }
}
