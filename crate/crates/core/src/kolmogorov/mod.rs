//! Conditional transition fields `P(s,t) = Z_s Y_t` and independent routes
//! to the same matrices.
//!
//! The primary route propagates `Z` and `Y` with exact matrix exponentials
//! over the constant pieces of the intensity. Peano-Baker and order-2
//! Magnus are verification routes.

mod field;
mod magnus;
mod peano_baker;
mod residual;

pub use field::{solve_zy, solve_zy_from, FieldInvariants, TransitionField, ZyPath};
pub use magnus::{magnus2, magnus2_adaptive, magnus2_from, Magnus2, MAGNUS_BLOCK_TOL, MAGNUS_GUARD};
pub use peano_baker::{peano_baker, peano_baker_from, peano_baker_split, PeanoBaker};
pub use residual::{kolmogorov_residual, KolmogorovResidual};

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{max_abs_diff, Matrix};
use crate::process::{evaluate_on_grid, FactorPath, IntensityModel, TimeGrid};

/// Pairwise agreement of the three routes for one `P(s,t)`.
#[derive(Debug, Clone, Serialize)]
pub struct RouteAgreement {
    pub s: f64,
    pub t: f64,
    pub piecewise_exponential: Vec<Vec<f64>>,
    pub peano_baker: Vec<Vec<f64>>,
    pub peano_baker_order: usize,
    pub magnus2: Vec<Vec<f64>>,
    pub magnus_blocks: usize,
    pub exp_vs_peano_baker: f64,
    pub exp_vs_magnus: f64,
    pub peano_baker_vs_magnus: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Default Peano-Baker settings used for route comparison.
pub const PEANO_BAKER_TOL: f64 = 1e-10;
pub const PEANO_BAKER_MAX_ORDER: usize = 80;
pub const ROUTE_TOL: f64 = 1e-6;

pub fn route_agreement(
    model: &dyn IntensityModel,
    factor: &FactorPath,
    grid: &TimeGrid,
    s: f64,
    t: f64,
    magnus_guard: f64,
) -> Result<RouteAgreement> {
    let (si, ti) = (grid.node_index(s)?, grid.node_index(t)?);
    let lambdas: Vec<Matrix> = evaluate_on_grid(model, factor, grid)?
        .into_iter()
        .map(|g| g.into_matrix())
        .collect();
    let field = solve_zy_from(&lambdas, grid).into_field();
    let pe = field.p(si, ti)?;
    let pieces = &lambdas[si..ti];
    let pb = peano_baker_split(pieces, grid.dt(), PEANO_BAKER_TOL, PEANO_BAKER_MAX_ORDER)?;
    let mg = magnus2_adaptive(pieces, grid.dt(), magnus_guard, MAGNUS_BLOCK_TOL);
    let a = max_abs_diff(&pe, &pb.matrix);
    let b = max_abs_diff(&pe, &mg.matrix);
    let c = max_abs_diff(&pb.matrix, &mg.matrix);
    Ok(RouteAgreement {
        s: grid.node(si),
        t: grid.node(ti),
        piecewise_exponential: crate::linalg::to_rows(&pe),
        peano_baker: crate::linalg::to_rows(&pb.matrix),
        peano_baker_order: pb.order,
        magnus2: crate::linalg::to_rows(&mg.matrix),
        magnus_blocks: mg.blocks,
        exp_vs_peano_baker: a,
        exp_vs_magnus: b,
        peano_baker_vs_magnus: c,
        tolerance: ROUTE_TOL,
        pass: a.max(b).max(c) < ROUTE_TOL,
    })
}
