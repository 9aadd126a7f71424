use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Row-sum tolerance for generator validation.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// One failed generator constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NotSquare { rows: usize, cols: usize },
    NonFinite { row: usize, col: usize },
    NegativeRate { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GeneratorReport {
    pub violations: Vec<Violation>,
}

impl GeneratorReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the intensity-matrix constraints: square, finite, off-diagonal
/// entries nonnegative and every row summing to zero within [`ROW_SUM_TOL`].
pub fn validate_generator(m: &Matrix) -> GeneratorReport {
    let mut violations = Vec::new();
    if m.nrows() != m.ncols() {
        violations.push(Violation::NotSquare { rows: m.nrows(), cols: m.ncols() });
        return GeneratorReport { violations };
    }
    for i in 0..m.nrows() {
        let mut sum = 0.0;
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if !v.is_finite() {
                violations.push(Violation::NonFinite { row: i, col: j });
            } else if i != j && v < 0.0 {
                violations.push(Violation::NegativeRate { row: i, col: j, value: v });
            }
            sum += v;
        }
        if !(sum.abs() <= ROW_SUM_TOL) {
            violations.push(Violation::RowSum { row: i, sum });
        }
    }
    GeneratorReport { violations }
}

/// A validated intensity (generator) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix(Matrix);

impl GeneratorMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        let report = validate_generator(&m);
        if report.is_ok() {
            Ok(Self(m))
        } else {
            Err(Error::Model(format!("{:?}", report.violations)))
        }
    }

    /// Builds a generator from off-diagonal rates; the diagonal of `rates`
    /// is ignored and replaced by minus the off-diagonal row sum.
    pub fn from_off_diagonal(mut rates: Matrix) -> Result<Self> {
        fill_diagonal(&mut rates);
        Self::new(rates)
    }

    pub fn zeros(d: usize) -> Self {
        Self(Matrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.0[(x, y)]
    }

    /// Largest off-diagonal entry.
    pub fn max_rate(&self) -> f64 {
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

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// Sets each diagonal entry to minus the sum of the off-diagonal entries of
/// its row.
pub(crate) fn fill_diagonal(m: &mut Matrix) {
    for i in 0..m.nrows() {
        let off: f64 = (0..m.ncols()).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = -off;
    }
}
