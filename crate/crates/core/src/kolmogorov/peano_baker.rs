use crate::error::{Error, Result};
use crate::linalg::{max_abs, Matrix};
use crate::process::{evaluate_on_grid, FactorPath, IntensityModel, TimeGrid};

/// Truncated Peano-Baker series and the order at which it was cut.
#[derive(Debug, Clone, PartialEq)]
pub struct PeanoBaker {
    pub matrix: Matrix,
    /// Index of the last term whose max-abs norm was `>= tol`.
    pub order: usize,
}

/// Peano-Baker series for the backward equation `P(v,t) = I + int_v^t Lambda_u P(u,t) du`
/// between grid nodes `v <= t`.
pub fn peano_baker(
    model: &dyn IntensityModel,
    factor: &FactorPath,
    grid: &TimeGrid,
    v: f64,
    t: f64,
    tol: f64,
    max_order: usize,
) -> Result<PeanoBaker> {
    let (vi, ti) = (grid.node_index(v)?, grid.node_index(t)?);
    if vi > ti {
        return Err(Error::Scenario(format!("need v <= t, got v={v}, t={t}")));
    }
    let lambdas: Vec<Matrix> = evaluate_on_grid(model, factor, grid)?
        .into_iter()
        .map(|g| g.into_matrix())
        .collect();
    peano_baker_from(&lambdas[vi..ti], grid.dt(), tol, max_order)
}

/// Series over consecutive constant pieces of width `h`.
///
/// The `n`-th term `T_n(u) = int_u^t Lambda_r T_{n-1}(r) dr` is a polynomial in
/// the distance `t_{j+1} - u` on each piece `j`, so every iterated integral
/// is evaluated exactly by carrying its coefficients piece by piece from the
/// right end.
pub fn peano_baker_from(pieces: &[Matrix], h: f64, tol: f64, max_order: usize) -> Result<PeanoBaker> {
    let m = pieces.len();
    let d = pieces.first().map_or(0, |p| p.nrows());
    let id = Matrix::identity(d.max(1), d.max(1));
    if m == 0 {
        return Ok(PeanoBaker { matrix: id, order: 0 });
    }
    let mut sum = id.clone();
    // prev[j][i]: coefficient of h^i for T_{n-1} on piece j.
    let mut prev: Vec<Vec<Matrix>> = vec![vec![id]; m];
    let mut order = 0;
    let mut last_norm = f64::INFINITY;
    for n in 1..=max_order {
        let mut cur: Vec<Vec<Matrix>> = vec![Vec::new(); m];
        let mut right = Matrix::zeros(d, d);
        for j in (0..m).rev() {
            let mut coeffs = Vec::with_capacity(n + 1);
            coeffs.push(right.clone());
            for (i, c) in prev[j].iter().enumerate() {
                coeffs.push(&pieces[j] * c / (i + 1) as f64);
            }
            // value at the left end of piece j
            let mut value = Matrix::zeros(d, d);
            let mut hp = 1.0;
            for c in &coeffs {
                value += c * hp;
                hp *= h;
            }
            right = value;
            cur[j] = coeffs;
        }
        last_norm = max_abs(&right);
        sum += &right;
        if last_norm < tol {
            return Ok(PeanoBaker { matrix: sum, order });
        }
        order = n;
        prev = cur;
    }
    Err(Error::NotConverged { order: max_order, last_term_norm: last_norm })
}

/// As [`peano_baker_from`], bisecting the range and multiplying the halves
/// whenever the series fails to converge.
pub fn peano_baker_split(pieces: &[Matrix], h: f64, tol: f64, max_order: usize) -> Result<PeanoBaker> {
    match peano_baker_from(pieces, h, tol, max_order) {
        Err(Error::NotConverged { .. }) if pieces.len() > 1 => {
            let mid = pieces.len() / 2;
            let left = peano_baker_split(&pieces[..mid], h, tol, max_order)?;
            let right = peano_baker_split(&pieces[mid..], h, tol, max_order)?;
            Ok(PeanoBaker { matrix: left.matrix * right.matrix, order: left.order.max(right.order) })
        }
        other => other,
    }
}
