//! Dense semidefinite programming for small problems.
//!
//! A [`ConicProblem`] minimizes a linear functional over a product of real
//! symmetric PSD blocks, nonnegative vectors and free vectors, subject to
//! affine equalities and `≥` inequalities. [`solve`] runs a primal-dual
//! interior-point method and reports a [`Status`] plus residuals.

mod problem;
mod solver;
mod standard;

pub use problem::{BlockId, BlockKind, BlockValue, ConicProblem, Functional};
pub use solver::{extract_dual, solve, ConicSolution, DualMultipliers, Residuals, SolverOptions, Status};

#[derive(Debug, thiserror::Error)]
pub enum ConicError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("dual multipliers unavailable for status {0:?}")]
    NoDual(Status),
}
