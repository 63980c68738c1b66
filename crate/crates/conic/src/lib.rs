//! Standard-form cone programs and the machinery to solve them.
//!
//! A [`ConicProblem`] is `min cᵀx + offset` subject to `Ax = b`, `x ∈ K`, where
//! `K` is a product of free, nonnegative, second-order and PSD blocks. PSD blocks
//! are stored as scaled lower-triangular vectors (see [`cone::svec`]) so that the
//! plain dot product matches the trace pairing. Second-order blocks put the head
//! (the bounding coordinate) last.
//!
//! Two backends implement [`ConicSolver`]: the embedded [`EmbeddedSolver`]
//! (homogeneous self-dual interior point with Nesterov-Todd scaling) and
//! [`SdpaBridge`], which shells out to an SDPA-format solver.

pub mod bridge;
pub mod cone;
pub mod dense;
mod error;
pub mod ipm;
mod presolve;
pub mod problem;
mod scaling;
pub mod sdpa;
pub mod solution;

pub use bridge::SdpaBridge;
pub use cone::Cone;
pub use error::ConicError;
pub use ipm::EmbeddedSolver;
pub use problem::{ConicProblem, RowGroup, SparseMatrix};
pub use solution::{ConicSolution, Residuals, SolverOptions, Status};

/// A backend able to solve a [`ConicProblem`].
pub trait ConicSolver: Send + Sync {
    fn solve(&self, problem: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution, ConicError>;

    /// Short human-readable backend name used in reports.
    fn name(&self) -> String;
}
