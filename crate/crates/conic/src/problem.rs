//! Problem description: blocks, linear functionals and constraints.

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::ConicError;

/// Handle to a variable block inside a [`ConicProblem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub(crate) usize);

impl BlockId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Kind of a variable block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Real symmetric positive semidefinite n×n matrix.
    Psd(usize),
    /// Vector of n nonnegative scalars.
    NonNeg(usize),
    /// Vector of n unrestricted scalars.
    Free(usize),
}

impl BlockKind {
    pub fn len(&self) -> usize {
        match *self {
            BlockKind::Psd(n) | BlockKind::NonNeg(n) | BlockKind::Free(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Term {
    Entry { block: BlockId, row: usize, col: usize, coef: f64 },
    Dense { block: BlockId, coef: DMatrix<f64> },
}

/// Linear functional over block entries.
///
/// `entry(b, i, j, c)` contributes `c·X[i,j]` for a PSD block (the matrix is
/// symmetric, so `X[i,j]` and `X[j,i]` are the same variable) and `c·x[i]` for
/// vector blocks, where `j` must be 0. `dense(b, C)` contributes `⟨C, X⟩`.
#[derive(Clone, Debug, Default)]
pub struct Functional {
    pub(crate) terms: Vec<Term>,
}

impl Functional {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entry(mut self, block: BlockId, row: usize, col: usize, coef: f64) -> Self {
        self.add_entry(block, row, col, coef);
        self
    }

    pub fn scalar(self, block: BlockId, index: usize, coef: f64) -> Self {
        self.entry(block, index, 0, coef)
    }

    pub fn dense(mut self, block: BlockId, coef: DMatrix<f64>) -> Self {
        self.add_dense(block, coef);
        self
    }

    pub fn add_entry(&mut self, block: BlockId, row: usize, col: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push(Term::Entry { block, row, col, coef });
        }
    }

    pub fn add_scalar(&mut self, block: BlockId, index: usize, coef: f64) {
        self.add_entry(block, index, 0, coef);
    }

    pub fn add_dense(&mut self, block: BlockId, coef: DMatrix<f64>) {
        self.terms.push(Term::Dense { block, coef });
    }

    /// Appends `scale · other`.
    pub fn add_scaled(&mut self, other: &Functional, scale: f64) {
        for t in &other.terms {
            match t {
                Term::Entry { block, row, col, coef } => {
                    self.add_entry(*block, *row, *col, coef * scale)
                }
                Term::Dense { block, coef } => self.add_dense(*block, coef * scale),
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates the functional at the given block values.
    pub fn eval(&self, values: &[BlockValue]) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            match t {
                Term::Entry { block, row, col, coef } => {
                    acc += coef
                        * match &values[block.0] {
                            BlockValue::Matrix(m) => m[(*row, *col)],
                            BlockValue::Vector(v) => v[*row],
                        }
                }
                Term::Dense { block, coef } => {
                    if let BlockValue::Matrix(m) = &values[block.0] {
                        acc += coef.dot(m);
                    }
                }
            }
        }
        acc
    }
}

/// Value of one block in a solution.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockValue {
    Matrix(DMatrix<f64>),
    Vector(Vec<f64>),
}

impl BlockValue {
    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            BlockValue::Matrix(m) => Some(m),
            BlockValue::Vector(_) => None,
        }
    }

    pub fn vector(&self) -> Option<&[f64]> {
        match self {
            BlockValue::Vector(v) => Some(v),
            BlockValue::Matrix(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Constraint {
    pub(crate) functional: Functional,
    pub(crate) rhs: f64,
}

/// Minimize a linear functional over a product of cones subject to affine
/// equalities `f(x) = b` and inequalities `f(x) ≥ b`.
#[derive(Clone, Debug, Default)]
pub struct ConicProblem {
    pub(crate) blocks: Vec<BlockKind>,
    pub(crate) objective: Functional,
    pub(crate) eqs: Vec<Constraint>,
    pub(crate) ineqs: Vec<Constraint>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, kind: BlockKind) -> BlockId {
        self.blocks.push(kind);
        BlockId(self.blocks.len() - 1)
    }

    pub fn psd(&mut self, n: usize) -> BlockId {
        self.add_block(BlockKind::Psd(n))
    }

    pub fn nonneg(&mut self, n: usize) -> BlockId {
        self.add_block(BlockKind::NonNeg(n))
    }

    pub fn free(&mut self, n: usize) -> BlockId {
        self.add_block(BlockKind::Free(n))
    }

    /// Sets the functional to minimize.
    pub fn minimize(&mut self, f: Functional) {
        self.objective = f;
    }

    /// Sets the functional to maximize (stored negated).
    pub fn maximize(&mut self, f: Functional) {
        let mut neg = Functional::new();
        neg.add_scaled(&f, -1.0);
        self.objective = neg;
    }

    /// Adds `f(x) = rhs`; returns the equality index.
    pub fn add_eq(&mut self, functional: Functional, rhs: f64) -> usize {
        self.eqs.push(Constraint { functional, rhs });
        self.eqs.len() - 1
    }

    /// Adds `f(x) ≥ rhs`; returns the inequality index.
    pub fn add_ge(&mut self, functional: Functional, rhs: f64) -> usize {
        self.ineqs.push(Constraint { functional, rhs });
        self.ineqs.len() - 1
    }

    /// Adds `f(x) ≤ rhs` as `−f(x) ≥ −rhs`; returns the inequality index.
    pub fn add_le(&mut self, functional: Functional, rhs: f64) -> usize {
        let mut neg = Functional::new();
        neg.add_scaled(&functional, -1.0);
        self.add_ge(neg, -rhs)
    }

    pub fn blocks(&self) -> &[BlockKind] {
        &self.blocks
    }

    pub fn objective(&self) -> &Functional {
        &self.objective
    }

    pub fn num_eqs(&self) -> usize {
        self.eqs.len()
    }

    pub fn num_ineqs(&self) -> usize {
        self.ineqs.len()
    }

    pub fn eq(&self, i: usize) -> (&Functional, f64) {
        (&self.eqs[i].functional, self.eqs[i].rhs)
    }

    pub fn ineq(&self, i: usize) -> (&Functional, f64) {
        (&self.ineqs[i].functional, self.ineqs[i].rhs)
    }

    pub(crate) fn validate(&self) -> Result<(), ConicError> {
        for (i, b) in self.blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(ConicError::InvalidProblem(format!("block {i} has size 0")));
            }
        }
        let check = |f: &Functional, what: &str| -> Result<(), ConicError> {
            for t in &f.terms {
                let (block, ok) = match t {
                    Term::Entry { block, row, col, coef } => {
                        let ok = coef.is_finite()
                            && match self.blocks.get(block.0) {
                                Some(BlockKind::Psd(n)) => row < n && col < n,
                                Some(BlockKind::NonNeg(n)) | Some(BlockKind::Free(n)) => {
                                    row < n && *col == 0
                                }
                                None => false,
                            };
                        (block, ok)
                    }
                    Term::Dense { block, coef } => {
                        let ok = coef.iter().all(|x| x.is_finite())
                            && match self.blocks.get(block.0) {
                                Some(BlockKind::Psd(n)) => coef.nrows() == *n && coef.ncols() == *n,
                                _ => false,
                            };
                        (block, ok)
                    }
                };
                if !ok {
                    return Err(ConicError::InvalidProblem(format!(
                        "{what} has an invalid term on block {}",
                        block.0
                    )));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.eqs.iter().enumerate() {
            check(&c.functional, &format!("equality {i}"))?;
            if !c.rhs.is_finite() {
                return Err(ConicError::InvalidProblem(format!("equality {i} rhs not finite")));
            }
        }
        for (i, c) in self.ineqs.iter().enumerate() {
            check(&c.functional, &format!("inequality {i}"))?;
            if !c.rhs.is_finite() {
                return Err(ConicError::InvalidProblem(format!("inequality {i} rhs not finite")));
            }
        }
        Ok(())
    }

    /// Dense coefficient of `f` on every block: symmetric matrices for PSD
    /// blocks, vectors (as n×1 matrices) for scalar blocks.
    pub fn dense_coefficients(&self, f: &Functional) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .map(|b| match *b {
                BlockKind::Psd(n) => DMatrix::zeros(n, n),
                BlockKind::NonNeg(n) | BlockKind::Free(n) => DMatrix::zeros(n, 1),
            })
            .collect();
        for t in &f.terms {
            match t {
                Term::Entry { block, row, col, coef } => match self.blocks[block.0] {
                    BlockKind::Psd(_) => {
                        if row == col {
                            out[block.0][(*row, *col)] += coef;
                        } else {
                            out[block.0][(*row, *col)] += 0.5 * coef;
                            out[block.0][(*col, *row)] += 0.5 * coef;
                        }
                    }
                    _ => out[block.0][(*row, 0)] += coef,
                },
                Term::Dense { block, coef } => {
                    out[block.0] += (coef + coef.transpose()) * 0.5;
                }
            }
        }
        out
    }

    /// Writes a plain-text dump: block kinds, then the objective and every
    /// constraint as dense row-major coefficient blocks.
    pub fn write_dump<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "blocks {}", self.blocks.len())?;
        for b in &self.blocks {
            match b {
                BlockKind::Psd(n) => writeln!(w, "psd {n}")?,
                BlockKind::NonNeg(n) => writeln!(w, "nonneg {n}")?,
                BlockKind::Free(n) => writeln!(w, "free {n}")?,
            }
        }
        let write_f = |w: &mut W, header: String, f: &Functional| -> io::Result<()> {
            writeln!(w, "{header}")?;
            for (i, m) in self.dense_coefficients(f).iter().enumerate() {
                write!(w, "block {i}:")?;
                for r in 0..m.nrows() {
                    for c in 0..m.ncols() {
                        write!(w, " {:.17e}", m[(r, c)])?;
                    }
                }
                writeln!(w)?;
            }
            Ok(())
        };
        write_f(w, "objective min".to_string(), &self.objective)?;
        for (i, c) in self.eqs.iter().enumerate() {
            write_f(w, format!("eq {i} rhs {:.17e}", c.rhs), &c.functional)?;
        }
        for (i, c) in self.ineqs.iter().enumerate() {
            write_f(w, format!("ge {i} rhs {:.17e}", c.rhs), &c.functional)?;
        }
        Ok(())
    }
}
