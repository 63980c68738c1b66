use serde::{Deserialize, Serialize};

use crate::cone::{smat, Cone};
use crate::problem::ConicProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    SlowProgress,
    NumericalError,
}

impl Status {
    /// Whether the iterate carries a usable objective value.
    pub fn has_value(self) -> bool {
        matches!(self, Status::Optimal | Status::SlowProgress)
    }
}

/// Relative residual norms of the reported iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol_gap: 1e-8, tol_feas: 1e-8, max_iter: 200, verbose: false }
    }
}

/// Primal/dual pair. `s = c − Aᵀy` is the dual slack; for infeasible statuses
/// `x` or `(y, s)` hold the certificate ray instead.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: Status,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl ConicSolution {
    pub fn objective(&self) -> f64 {
        self.primal_objective
    }

    pub fn block_x<'a>(&'a self, p: &ConicProblem, block: usize) -> &'a [f64] {
        &self.x[p.block_ranges()[block].clone()]
    }

    pub fn block_s<'a>(&'a self, p: &ConicProblem, block: usize) -> &'a [f64] {
        &self.s[p.block_ranges()[block].clone()]
    }

    /// Dual slack of a PSD block as a full row-major matrix.
    pub fn dual_block_matrix(&self, p: &ConicProblem, block: usize) -> Option<Vec<f64>> {
        match p.cones[block] {
            Cone::Psd(k) => Some(smat(self.block_s(p, block), k)),
            _ => None,
        }
    }

    /// Primal value of a PSD block as a full row-major matrix.
    pub fn primal_block_matrix(&self, p: &ConicProblem, block: usize) -> Option<Vec<f64>> {
        match p.cones[block] {
            Cone::Psd(k) => Some(smat(self.block_x(p, block), k)),
            _ => None,
        }
    }
}
