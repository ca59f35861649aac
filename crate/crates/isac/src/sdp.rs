//! Complex Hermitian variables on top of the real conic solver.
//!
//! A Hermitian n×n variable `X` is carried by a real PSD block `Y` of order
//! 2n and read back as `complexify(Y)`. Every functional here is written in
//! terms of that read-back, so `Y` never needs the block structure of an
//! embedding.

use conic::{BlockId, ConicProblem, ConicSolution, Functional, SolverOptions, Status};

use crate::error::{Error, Result};
use crate::numerics::{complexify, real_embed, CMatrix, HermitianMatrix, J};

#[derive(Clone, Copy, Debug)]
pub(crate) struct HermVar {
    pub block: BlockId,
    pub n: usize,
}

impl HermVar {
    pub fn new(p: &mut ConicProblem, n: usize) -> Self {
        Self { block: p.psd(2 * n), n }
    }

    /// Adds `s · Re tr(C X)`.
    pub fn add_re_tr(&self, f: &mut Functional, c: &CMatrix, s: f64) {
        let h = HermitianMatrix::from_raw(c.clone());
        f.add_dense(self.block, real_embed(&h) * (0.5 * s));
    }

    /// Adds `s · Im tr(C X)`.
    pub fn add_im_tr(&self, f: &mut Functional, c: &CMatrix, s: f64) {
        self.add_re_tr(f, &(c * -J), s);
    }

    /// Adds `s · Re X[i,j]`.
    pub fn add_re_entry(&self, f: &mut Functional, i: usize, j: usize, s: f64) {
        let n = self.n;
        f.add_entry(self.block, i, j, 0.5 * s);
        f.add_entry(self.block, n + i, n + j, 0.5 * s);
    }

    /// Adds `s · Im X[i,j]`.
    pub fn add_im_entry(&self, f: &mut Functional, i: usize, j: usize, s: f64) {
        let n = self.n;
        f.add_entry(self.block, j, n + i, 0.5 * s);
        f.add_entry(self.block, i, n + j, -0.5 * s);
    }

    /// Adds `s · tr X`.
    #[cfg(test)]
    pub fn add_trace(&self, f: &mut Functional, s: f64) {
        for i in 0..self.n {
            self.add_re_entry(f, i, i, s);
        }
    }

    pub fn value(&self, sol: &ConicSolution) -> HermitianMatrix {
        complexify(sol.matrix(self.block))
    }
}

/// Solver settings shared by every relaxation in the crate.
pub(crate) fn options() -> SolverOptions {
    SolverOptions { max_iter: 150, ..SolverOptions::with_tolerance(1e-9) }
}

/// Accepts an iterate that stopped short of the target accuracy when it is
/// still accurate enough for downstream checks.
const SALVAGE_FEAS: f64 = 1e-7;
const SALVAGE_GAP: f64 = 1e-4;

pub(crate) fn solve(p: &ConicProblem, what: &str) -> Result<ConicSolution> {
    classify(solve_raw(p)?, what)
}

pub(crate) fn solve_raw(p: &ConicProblem) -> Result<ConicSolution> {
    Ok(conic::solve(p, &options())?)
}

pub(crate) fn classify(sol: ConicSolution, what: &str) -> Result<ConicSolution> {
    match sol.status {
        Status::Optimal => Ok(sol),
        Status::Infeasible => Err(Error::Infeasible(format!("{what} relaxation is infeasible"))),
        Status::Unbounded => Err(Error::Numerical(format!("{what} relaxation reported unbounded"))),
        Status::NumericalLimit
            if sol.residuals.primal <= SALVAGE_FEAS && sol.residuals.gap <= SALVAGE_GAP =>
        {
            log::debug!("{what}: accepting iterate at numerical limit, {:?}", sol.residuals);
            Ok(sol)
        }
        Status::NumericalLimit => Err(Error::Numerical(format!(
            "{what} relaxation stalled with residuals {:?}",
            sol.residuals
        ))),
    }
}
