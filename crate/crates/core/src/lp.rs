//! Small auxiliary cone programs: a column/row builder and polytope LPs.
//!
//! LPs over a polytope `{w | Γw ≤ h, Bw = θ}` are posed in dual form so the
//! interior-point solver only sees `L` equality rows, however many faces the
//! polytope has.

use lie_robust_conic::{Cone, ConicError, ConicProblem, ConicSolution, ConicSolver, EmbeddedSolver, SolverOptions, SparseMatrix, Status};
use nalgebra::{DMatrix, DVector};

/// Incremental builder for a standard-form cone program.
#[derive(Default)]
pub struct Builder {
    cones: Vec<Cone>,
    ncols: usize,
    trips: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a cone block; returns its first column.
    pub fn block(&mut self, cone: Cone) -> usize {
        let start = self.ncols;
        self.ncols += cone.dim();
        self.c.resize(self.ncols, 0.0);
        self.cones.push(cone);
        start
    }

    pub fn row(&mut self, entries: &[(usize, f64)], rhs: f64) -> usize {
        let r = self.b.len();
        for &(col, v) in entries {
            if v != 0.0 {
                self.trips.push((r, col, v));
            }
        }
        self.b.push(rhs);
        r
    }

    pub fn cost(&mut self, col: usize, v: f64) {
        self.c[col] += v;
    }

    pub fn build(self) -> ConicProblem {
        let a = SparseMatrix::from_triplets(self.b.len(), self.ncols, &self.trips);
        ConicProblem::new(self.cones, a, self.b, self.c)
    }
}

pub(crate) fn tight_options() -> SolverOptions {
    SolverOptions { tol_gap: 1e-10, tol_feas: 1e-10, max_iter: 200, verbose: false }
}

pub(crate) fn solve_small(p: &ConicProblem) -> Result<ConicSolution, ConicError> {
    EmbeddedSolver.solve(p, &tight_options())
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { w: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// `max cᵀw s.t. Γw ≤ h, Bw = θ`.
pub fn maximize(
    c: &[f64],
    gamma: &DMatrix<f64>,
    h: &DVector<f64>,
    eq: Option<(&DMatrix<f64>, &DVector<f64>)>,
) -> Result<LpOutcome, ConicError> {
    let l = c.len();
    let m = gamma.nrows();
    assert_eq!(gamma.ncols(), l, "LP dimension");
    let mut bld = Builder::new();
    let r = eq.map(|(b, _)| b.nrows()).unwrap_or(0);
    let z0 = if r > 0 { Some(bld.block(Cone::Free(r))) } else { None };
    let y0 = bld.block(Cone::Nonnegative(m));
    for i in 0..m {
        bld.cost(y0 + i, h[i]);
    }
    if let (Some(z0), Some((_, theta))) = (z0, eq) {
        for k in 0..r {
            bld.cost(z0 + k, theta[k]);
        }
    }
    for (j, &cj) in c.iter().enumerate() {
        let mut e: Vec<(usize, f64)> = (0..m).map(|i| (y0 + i, gamma[(i, j)])).collect();
        if let (Some(z0), Some((b, _))) = (z0, eq) {
            e.extend((0..r).map(|k| (z0 + k, b[(k, j)])));
        }
        bld.row(&e, cj);
    }
    let p = bld.build();
    let sol = solve_small(&p)?;
    Ok(match sol.status {
        Status::Optimal | Status::SlowProgress => {
            LpOutcome::Optimal { w: sol.y.clone(), value: 0.5 * (sol.primal_objective + sol.dual_objective) }
        }
        // The conic primal is the LP dual.
        Status::PrimalInfeasible => LpOutcome::Unbounded,
        Status::DualInfeasible => LpOutcome::Infeasible,
        Status::NumericalError => {
            return Err(ConicError::Backend("LP solve failed numerically".into()));
        }
    })
}
