//! Small dense matrix helpers on top of `nalgebra`.
//!
//! Matrices here are tiny (a handful of states), so everything is plain
//! `DMatrix<f64>` arithmetic.

use nalgebra::DMatrix;

pub type Matrix = DMatrix<f64>;

/// Series truncation tolerance for [`expm`].
pub const EXPM_SERIES_TOL: f64 = 1e-14;

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
    a * b - b * a
}

pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Matrix exponential by scaling and squaring of the Taylor series.
///
/// The matrix is scaled by `2^-s` so that its max-abs norm is at most 1/2,
/// the series is summed until a term drops below [`EXPM_SERIES_TOL`], and
/// the result is squared `s` times.
pub fn expm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let norm = max_abs(a) * n as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-squarings);

    let mut result = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    let mut next = Matrix::zeros(n, n);
    for k in 1..=60 {
        next.gemm(1.0 / k as f64, &term, &scaled, 0.0);
        std::mem::swap(&mut term, &mut next);
        result += &term;
        if max_abs(&term) < EXPM_SERIES_TOL {
            break;
        }
    }
    for _ in 0..squarings {
        next.gemm(1.0, &result, &result, 0.0);
        std::mem::swap(&mut result, &mut next);
    }
    result
}
