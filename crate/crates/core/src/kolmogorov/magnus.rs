use crate::error::{Error, Result};
use crate::linalg::{commutator, expm, inf_norm, max_abs_diff, Matrix};
use crate::process::{evaluate_on_grid, FactorPath, IntensityModel, TimeGrid};

/// Bisection threshold on `int ||Lambda_u|| du` for the order-2 truncation.
pub const MAGNUS_GUARD: f64 = std::f64::consts::PI;

/// Step-doubling acceptance tolerance for one block in [`magnus2_adaptive`].
pub const MAGNUS_BLOCK_TOL: f64 = 1e-8;

/// Order-2 Magnus approximation of `P(v,t)` between grid nodes.
pub fn magnus2(
    model: &dyn IntensityModel,
    factor: &FactorPath,
    grid: &TimeGrid,
    v: f64,
    t: f64,
) -> Result<Matrix> {
    let (vi, ti) = (grid.node_index(v)?, grid.node_index(t)?);
    if vi > ti {
        return Err(Error::Scenario(format!("need v <= t, got v={v}, t={t}")));
    }
    let lambdas: Vec<Matrix> = evaluate_on_grid(model, factor, grid)?
        .into_iter()
        .map(|g| g.into_matrix())
        .collect();
    Ok(magnus2_adaptive(&lambdas[vi..ti], grid.dt(), MAGNUS_GUARD, MAGNUS_BLOCK_TOL).matrix)
}

/// Result of [`magnus2_adaptive`].
#[derive(Debug, Clone, PartialEq)]
pub struct Magnus2 {
    pub matrix: Matrix,
    /// Number of blocks the range was finally cut into.
    pub blocks: usize,
}

/// [`magnus2_from`] with an accuracy check on top of the norm guard: a
/// block is kept only if its value agrees within `tol` with the product of
/// the values on its two halves, otherwise it is bisected.
pub fn magnus2_adaptive(pieces: &[Matrix], h: f64, guard: f64, tol: f64) -> Magnus2 {
    let d = pieces.first().map_or(1, |p| p.nrows());
    if pieces.len() <= 1 {
        return Magnus2 { matrix: magnus2_from(pieces, h, guard), blocks: pieces.len().max(1) };
    }
    let mid = pieces.len() / 2;
    let size: f64 = pieces.iter().map(|p| inf_norm(p) * h).sum();
    if size < guard {
        let whole = magnus_block(pieces, h, d);
        let halves = magnus_block(&pieces[..mid], h, d) * magnus_block(&pieces[mid..], h, d);
        if max_abs_diff(&whole, &halves) <= tol {
            return Magnus2 { matrix: whole, blocks: 1 };
        }
    }
    let (a, b) = (magnus2_adaptive(&pieces[..mid], h, guard, tol), magnus2_adaptive(&pieces[mid..], h, guard, tol));
    Magnus2 { matrix: a.matrix * b.matrix, blocks: a.blocks + b.blocks }
}

/// `exp(Phi_1 + Phi_2)` over consecutive constant pieces of width `h`, with
/// `Phi_1 = sum_j Lambda_j h` and `Phi_2 = 1/2 sum_{i<j} [Lambda_i, Lambda_j] h^2`
/// (earlier piece on the left). Ranges whose `sum_j ||Lambda_j|| h` reaches
/// `guard` are bisected and the halves multiplied in time order.
pub fn magnus2_from(pieces: &[Matrix], h: f64, guard: f64) -> Matrix {
    let d = pieces.first().map_or(1, |p| p.nrows());
    if pieces.is_empty() {
        return Matrix::identity(d, d);
    }
    let size: f64 = pieces.iter().map(|p| inf_norm(p) * h).sum();
    if size >= guard && pieces.len() > 1 {
        let mid = pieces.len() / 2;
        return magnus2_from(&pieces[..mid], h, guard) * magnus2_from(&pieces[mid..], h, guard);
    }
    magnus_block(pieces, h, d)
}

fn magnus_block(pieces: &[Matrix], h: f64, d: usize) -> Matrix {
    let mut phi1 = Matrix::zeros(d, d);
    let mut phi2 = Matrix::zeros(d, d);
    for p in pieces {
        // sum_{i<j} [L_i, L_j] = sum_j [S_j, L_j] with S_j = sum_{i<j} L_i
        phi2 += commutator(&phi1, p) * h;
        phi1 += p * h;
    }
    expm(&(phi1 + phi2 * 0.5))
}
