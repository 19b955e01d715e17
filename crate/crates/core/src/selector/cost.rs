use serde::{Deserialize, Serialize};

use crate::solvers::SolverKind;

/// Parameters of the flop-cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    pub num_iters: usize,
}

impl Default for CostModelParams {
    fn default() -> Self {
        Self { num_iters: 5 }
    }
}

/// Symmetric eigendecomposition of an `i x i` matrix.
pub fn f_eig(i: f64) -> f64 {
    9.0 * i * i * i
}

/// Householder QR of an `i x r` matrix.
pub fn f_qr(i: f64, r: f64) -> f64 {
    2.0 * i * r * r - 2.0 / 3.0 * r * r * r
}

/// Inverse of an `r x r` matrix.
pub fn f_inv(r: f64) -> f64 {
    2.0 * r * r * r
}

/// Gram matrix, eigendecomposition, and projection.
pub fn cost_eig(i: usize, r: usize, j: usize, _params: &CostModelParams) -> f64 {
    let (i, r, j) = (i as f64, r as f64, j as f64);
    i * i * j + 2.0 * i * r * j + f_eig(i)
}

/// `num_iters` ALS sweeps, then QR of `L` and the final core product.
pub fn cost_als(i: usize, r: usize, j: usize, params: &CostModelParams) -> f64 {
    let (i, r, j) = (i as f64, r as f64, j as f64);
    let sweep = 2.0 * i * j * r
        + 2.0 * j * r * r
        + 2.0 * i * j * r
        + 2.0 * j * r * r
        + 4.0 * i * r * r
        + 2.0 * f_inv(r);
    sweep * params.num_iters as f64 + 2.0 * j * r * r + f_qr(i, r)
}

/// The cheaper solver under the cost model; ties go to EIG.
pub fn heuristic_choice(i: usize, r: usize, j: usize, params: &CostModelParams) -> SolverKind {
    cheaper(cost_eig(i, r, j, params), cost_als(i, r, j, params))
}

/// EIG unless ALS is strictly cheaper.
pub fn cheaper(cost_eig: f64, cost_als: f64) -> SolverKind {
    if cost_eig <= cost_als {
        SolverKind::Eig
    } else {
        SolverKind::Als
    }
}
