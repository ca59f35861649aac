//! Lowering of a [`ConicProblem`] to the internal standard form
//! `min ⟨C, X⟩  s.t.  A(X) = b,  X ∈ R₊^l × S₊^{n₁} × …`.
//!
//! Free scalars are split into two nonnegative parts and every inequality
//! gets a nonnegative surplus variable. Rows are scaled to unit norm and the
//! objective to unit norm; the scale factors are kept for unscaling duals.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::problem::{BlockKind, ConicProblem, Functional, Term};

/// Symmetric coefficient matrix of one constraint on one PSD block.
#[derive(Clone, Debug)]
pub(crate) enum SymCoef {
    /// Upper-triangle entries `(r, c, v)` with `r ≤ c`; `A[r,c] = A[c,r] = v`.
    Sparse(Vec<(usize, usize, f64)>),
    Dense(DMatrix<f64>),
}

impl SymCoef {
    pub(crate) fn dot(&self, x: &DMatrix<f64>) -> f64 {
        match self {
            SymCoef::Sparse(e) => e
                .iter()
                .map(|&(r, c, v)| if r == c { v * x[(r, r)] } else { v * (x[(r, c)] + x[(c, r)]) })
                .sum(),
            SymCoef::Dense(a) => a.dot(x),
        }
    }

    pub(crate) fn axpy_into(&self, alpha: f64, target: &mut DMatrix<f64>) {
        match self {
            SymCoef::Sparse(e) => {
                for &(r, c, v) in e {
                    target[(r, c)] += alpha * v;
                    if r != c {
                        target[(c, r)] += alpha * v;
                    }
                }
            }
            SymCoef::Dense(a) => *target += a * alpha,
        }
    }

    /// `W A W` for symmetric `W`.
    pub(crate) fn sandwich(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let n = w.nrows();
        match self {
            SymCoef::Sparse(e) if e.len() < n => {
                let mut t = DMatrix::zeros(n, n);
                for &(r, c, v) in e {
                    let wr = w.column(r);
                    let wc = w.column(c);
                    if r == c {
                        t.ger(v, &wr, &wr, 1.0);
                    } else {
                        t.ger(v, &wr, &wc, 1.0);
                        t.ger(v, &wc, &wr, 1.0);
                    }
                }
                t
            }
            _ => {
                let a = self.to_dense(n);
                w * (a * w)
            }
        }
    }

    pub(crate) fn to_dense(&self, n: usize) -> DMatrix<f64> {
        match self {
            SymCoef::Dense(a) => a.clone(),
            SymCoef::Sparse(_) => {
                let mut a = DMatrix::zeros(n, n);
                self.axpy_into(1.0, &mut a);
                a
            }
        }
    }

    pub(crate) fn norm_sq(&self) -> f64 {
        match self {
            SymCoef::Sparse(e) => e
                .iter()
                .map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
                .sum(),
            SymCoef::Dense(a) => a.norm_squared(),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            SymCoef::Sparse(e) => e.iter_mut().for_each(|t| t.2 *= s),
            SymCoef::Dense(a) => *a *= s,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Row {
    pub(crate) lp: Vec<(usize, f64)>,
    pub(crate) psd: Vec<(usize, SymCoef)>,
}

impl Row {
    fn norm_sq(&self) -> f64 {
        self.lp.iter().map(|(_, v)| v * v).sum::<f64>()
            + self.psd.iter().map(|(_, a)| a.norm_sq()).sum::<f64>()
    }

    fn scale(&mut self, s: f64) {
        self.lp.iter_mut().for_each(|t| t.1 *= s);
        self.psd.iter_mut().for_each(|t| t.1.scale(s));
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Slot {
    Psd(usize),
    NonNeg(usize),
    Free(usize),
}

/// Where each user-level object lives in the standard form.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub(crate) slots: Vec<Slot>,
    /// Standard-form row of each equality (`None` when dropped as empty).
    pub(crate) eq_rows: Vec<Option<usize>>,
    pub(crate) ineq_rows: Vec<usize>,
    /// An empty equality row with nonzero right-hand side.
    pub(crate) inconsistent: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct Standard {
    pub(crate) n_lp: usize,
    pub(crate) dims: Vec<usize>,
    pub(crate) c_lp: DVector<f64>,
    pub(crate) c_psd: Vec<DMatrix<f64>>,
    pub(crate) rows: Vec<Row>,
    pub(crate) b: DVector<f64>,
    /// Per LP variable: `(row, coefficient)` sorted by row.
    pub(crate) lp_cols: Vec<Vec<(usize, f64)>>,
    /// Per PSD block: `(row, position in row.psd)` sorted by row.
    pub(crate) psd_rows: Vec<Vec<(usize, usize)>>,
    /// Original row = scaled row · row_scale.
    pub(crate) row_scale: Vec<f64>,
    /// Original objective = scaled objective · obj_scale.
    pub(crate) obj_scale: f64,
}

struct Lowered {
    lp: BTreeMap<usize, f64>,
    sparse: BTreeMap<usize, BTreeMap<(usize, usize), f64>>,
    dense: BTreeMap<usize, DMatrix<f64>>,
}

fn lower(f: &Functional, slots: &[Slot], dims: &[usize]) -> Lowered {
    let mut out = Lowered { lp: BTreeMap::new(), sparse: BTreeMap::new(), dense: BTreeMap::new() };
    for t in &f.terms {
        match t {
            Term::Entry { block, row, col, coef } => match slots[block.0] {
                Slot::Psd(k) => {
                    let (r, c) = if row <= col { (*row, *col) } else { (*col, *row) };
                    let v = if r == c { *coef } else { 0.5 * coef };
                    *out.sparse.entry(k).or_default().entry((r, c)).or_insert(0.0) += v;
                }
                Slot::NonNeg(o) => *out.lp.entry(o + row).or_insert(0.0) += coef,
                Slot::Free(o) => {
                    *out.lp.entry(o + 2 * row).or_insert(0.0) += coef;
                    *out.lp.entry(o + 2 * row + 1).or_insert(0.0) -= coef;
                }
            },
            Term::Dense { block, coef } => {
                if let Slot::Psd(k) = slots[block.0] {
                    let n = dims[k];
                    let acc = out.dense.entry(k).or_insert_with(|| DMatrix::zeros(n, n));
                    *acc += (coef + coef.transpose()) * 0.5;
                }
            }
        }
    }
    out
}

fn to_row(l: Lowered, dims: &[usize]) -> Row {
    let lp = l.lp.into_iter().filter(|(_, v)| *v != 0.0).collect();
    let mut psd = Vec::new();
    let mut keys: Vec<usize> = l.sparse.keys().chain(l.dense.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    for k in keys {
        let n = dims[k];
        let entries: Vec<(usize, usize, f64)> = l
            .sparse
            .get(&k)
            .map(|m| m.iter().filter(|(_, v)| **v != 0.0).map(|(&(r, c), &v)| (r, c, v)).collect())
            .unwrap_or_default();
        let coef = match l.dense.get(&k) {
            Some(d) => {
                let mut a = d.clone();
                SymCoef::Sparse(entries).axpy_into(1.0, &mut a);
                SymCoef::Dense(a)
            }
            None if entries.len() * 4 > n * (n + 1) => {
                SymCoef::Dense(SymCoef::Sparse(entries).to_dense(n))
            }
            None => SymCoef::Sparse(entries),
        };
        if coef.norm_sq() > 0.0 {
            psd.push((k, coef));
        }
    }
    Row { lp, psd }
}

impl Standard {
    pub(crate) fn build(p: &ConicProblem) -> (Standard, Layout) {
        let mut slots = Vec::with_capacity(p.blocks.len());
        let mut dims = Vec::new();
        let mut n_lp = 0;
        for b in &p.blocks {
            match *b {
                BlockKind::Psd(n) => {
                    slots.push(Slot::Psd(dims.len()));
                    dims.push(n);
                }
                BlockKind::NonNeg(n) => {
                    slots.push(Slot::NonNeg(n_lp));
                    n_lp += n;
                }
                BlockKind::Free(n) => {
                    slots.push(Slot::Free(n_lp));
                    n_lp += 2 * n;
                }
            }
        }
        let surplus_start = n_lp;
        n_lp += p.ineqs.len();

        let mut rows = Vec::new();
        let mut b = Vec::new();
        let mut eq_rows = Vec::with_capacity(p.eqs.len());
        let mut inconsistent = false;
        for c in &p.eqs {
            let row = to_row(lower(&c.functional, &slots, &dims), &dims);
            if row.lp.is_empty() && row.psd.is_empty() {
                if c.rhs != 0.0 {
                    inconsistent = true;
                }
                eq_rows.push(None);
            } else {
                eq_rows.push(Some(rows.len()));
                rows.push(row);
                b.push(c.rhs);
            }
        }
        let mut ineq_rows = Vec::with_capacity(p.ineqs.len());
        for (j, c) in p.ineqs.iter().enumerate() {
            let mut row = to_row(lower(&c.functional, &slots, &dims), &dims);
            row.lp.push((surplus_start + j, -1.0));
            row.lp.sort_by_key(|t| t.0);
            ineq_rows.push(rows.len());
            rows.push(row);
            b.push(c.rhs);
        }

        let mut row_scale = Vec::with_capacity(rows.len());
        for (row, bi) in rows.iter_mut().zip(b.iter_mut()) {
            let s = row.norm_sq().sqrt();
            row.scale(1.0 / s);
            *bi /= s;
            row_scale.push(s);
        }

        let obj = to_row(lower(&p.objective, &slots, &dims), &dims);
        let mut c_lp = DVector::zeros(n_lp);
        for &(i, v) in &obj.lp {
            c_lp[i] = v;
        }
        let mut c_psd: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (k, a) in &obj.psd {
            a.axpy_into(1.0, &mut c_psd[*k]);
        }
        let c_norm = (c_lp.norm_squared() + c_psd.iter().map(|m| m.norm_squared()).sum::<f64>()).sqrt();
        let obj_scale = if c_norm > 0.0 { c_norm } else { 1.0 };
        c_lp /= obj_scale;
        c_psd.iter_mut().for_each(|m| *m /= obj_scale);

        let mut lp_cols = vec![Vec::new(); n_lp];
        let mut psd_rows = vec![Vec::new(); dims.len()];
        for (i, row) in rows.iter().enumerate() {
            for &(l, v) in &row.lp {
                lp_cols[l].push((i, v));
            }
            for (pos, (k, _)) in row.psd.iter().enumerate() {
                psd_rows[*k].push((i, pos));
            }
        }

        let std = Standard {
            n_lp,
            dims,
            c_lp,
            c_psd,
            rows,
            b: DVector::from_vec(b),
            lp_cols,
            psd_rows,
            row_scale,
            obj_scale,
        };
        (std, Layout { slots, eq_rows, ineq_rows, inconsistent })
    }

    pub(crate) fn m(&self) -> usize {
        self.rows.len()
    }

    /// Barrier parameter normalizer: total cone order.
    pub(crate) fn order(&self) -> usize {
        self.n_lp + self.dims.iter().sum::<usize>()
    }

    pub(crate) fn apply(&self, x_lp: &DVector<f64>, x_psd: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.rows.iter().map(|row| {
                row.lp.iter().map(|&(l, v)| v * x_lp[l]).sum::<f64>()
                    + row.psd.iter().map(|(k, a)| a.dot(&x_psd[*k])).sum::<f64>()
            }),
        )
    }

    pub(crate) fn apply_adjoint(&self, y: &DVector<f64>) -> (DVector<f64>, Vec<DMatrix<f64>>) {
        let mut lp = DVector::zeros(self.n_lp);
        let mut psd: Vec<DMatrix<f64>> = self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (row, &yi) in self.rows.iter().zip(y.iter()) {
            if yi == 0.0 {
                continue;
            }
            for &(l, v) in &row.lp {
                lp[l] += v * yi;
            }
            for (k, a) in &row.psd {
                a.axpy_into(yi, &mut psd[*k]);
            }
        }
        (lp, psd)
    }
}
