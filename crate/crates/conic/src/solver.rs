//! Infeasible-start primal-dual path-following method with Nesterov–Todd
//! scaling and Mehrotra predictor-corrector steps.

use log::trace;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SVD};

use crate::problem::{BlockKind, BlockValue, ConicProblem};
use crate::standard::{Layout, Slot, Standard};
use crate::ConicError;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Relative primal and dual residual tolerance.
    pub eps_feas: f64,
    /// Relative duality gap tolerance.
    pub eps_gap: f64,
    /// Tolerance on normalized infeasibility certificates.
    pub eps_infeas: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { eps_feas: 1e-7, eps_gap: 1e-7, eps_infeas: 1e-7, max_iter: 100 }
    }
}

impl SolverOptions {
    pub fn with_tolerance(eps: f64) -> Self {
        Self { eps_feas: eps, eps_gap: eps, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

/// Relative residuals of the returned iterate, measured on the internally
/// normalized problem.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Lagrange multipliers in the sign convention of the problem:
/// `C = Σ yᵢ Aᵢ + Σ zⱼ Fⱼ + S` with `zⱼ ≥ 0` for inequalities.
#[derive(Clone, Debug, Default)]
pub struct DualMultipliers {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    /// Dual slack per block.
    pub slack: Vec<BlockValue>,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: Status,
    pub blocks: Vec<BlockValue>,
    pub objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    duals: DualMultipliers,
}

impl ConicSolution {
    pub fn matrix(&self, id: crate::BlockId) -> &DMatrix<f64> {
        self.blocks[id.index()].matrix().expect("block is not a matrix block")
    }

    pub fn vector(&self, id: crate::BlockId) -> &[f64] {
        self.blocks[id.index()].vector().expect("block is not a vector block")
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Dual multipliers of an optimal solve.
pub fn extract_dual(sol: &ConicSolution) -> Result<&DualMultipliers, ConicError> {
    if sol.status == Status::Optimal {
        Ok(&sol.duals)
    } else {
        Err(ConicError::NoDual(sol.status))
    }
}

/// Solves `p`. Errors are reserved for malformed problems; solver outcomes
/// are reported through [`ConicSolution::status`].
pub fn solve(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution, ConicError> {
    p.validate()?;
    let (std, layout) = Standard::build(p);
    if layout.inconsistent {
        let it = Iterate::initial(&std);
        return Ok(assemble(p, &std, &layout, &it, Status::Infeasible, Residuals::default(), 0));
    }
    let (it, status, res, iters) = Ipm { std: &std, opts }.run();
    Ok(assemble(p, &std, &layout, &it, status, res, iters))
}

#[derive(Clone, Debug)]
struct Iterate {
    x_lp: DVector<f64>,
    z_lp: DVector<f64>,
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    y: DVector<f64>,
}

impl Iterate {
    fn initial(std: &Standard) -> Self {
        let m = std.m();
        let mut x = Vec::new();
        let mut z = Vec::new();
        for (k, &n) in std.dims.iter().enumerate() {
            let nf = n as f64;
            let mut xi: f64 = 10f64.max(nf.sqrt());
            let mut eta: f64 = 10f64.max(nf.sqrt()).max(std.c_psd[k].norm());
            for &(i, pos) in &std.psd_rows[k] {
                let a = std.rows[i].psd[pos].1.norm_sq().sqrt();
                xi = xi.max(nf.sqrt() * (1.0 + std.b[i].abs()) / (1.0 + a));
                eta = eta.max(a);
            }
            x.push(DMatrix::identity(n, n) * xi);
            z.push(DMatrix::identity(n, n) * eta);
        }
        let nl = std.n_lp as f64;
        let mut xi: f64 = 10f64.max(nl.sqrt());
        let mut eta: f64 = 10f64.max(nl.sqrt()).max(std.c_lp.norm());
        for (i, row) in std.rows.iter().enumerate() {
            if row.lp.is_empty() {
                continue;
            }
            let a = row.lp.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            xi = xi.max(nl.sqrt() * (1.0 + std.b[i].abs()) / (1.0 + a));
            eta = eta.max(a);
        }
        Iterate {
            x_lp: DVector::from_element(std.n_lp, xi),
            z_lp: DVector::from_element(std.n_lp, eta),
            x,
            z,
            y: DVector::zeros(m),
        }
    }
}

/// Nesterov–Todd scaling of one PSD block: `W = G Gᵀ`, `W Z W = X`,
/// `G⁻¹ X G⁻ᵀ = Gᵀ Z G = diag(v)`.
struct BlockScaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    v: DVector<f64>,
    lx: DMatrix<f64>,
    lz: DMatrix<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<BlockScaling> {
    let lx = Cholesky::new(x.clone())?.l();
    let lz = Cholesky::new(z.clone())?.l();
    let k = lz.transpose() * &lx;
    let svd = SVD::new(k, false, true);
    let vt = svd.v_t?;
    let s = svd.singular_values;
    if s.iter().any(|&si| !(si > 0.0) || !si.is_finite()) {
        return None;
    }
    let n = x.nrows();
    let lx_inv = lx.clone().solve_lower_triangular(&DMatrix::identity(n, n))?;
    let v = vt.transpose();
    let mut g = &lx * &v;
    for (j, &sj) in s.iter().enumerate() {
        g.column_mut(j).scale_mut(1.0 / sj.sqrt());
    }
    let mut g_inv = &vt * lx_inv;
    for (i, &si) in s.iter().enumerate() {
        g_inv.row_mut(i).scale_mut(si.sqrt());
    }
    let w = &g * g.transpose();
    let w = (&w + w.transpose()) * 0.5;
    Some(BlockScaling { g, g_inv, w, v: s, lx, lz })
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest step `α` with `L Lᵀ + α Δ ⪰ 0` given the Cholesky factor `L`.
fn max_step_psd(l: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let n = l.nrows();
    let Some(li) = l.clone().solve_lower_triangular(&DMatrix::identity(n, n)) else {
        return 0.0;
    };
    let m = sym(&li * d * li.transpose());
    let lmin = m.symmetric_eigenvalues().min();
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn max_step_lp(x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    x.iter()
        .zip(d.iter())
        .filter(|(_, &di)| di < 0.0)
        .map(|(&xi, &di)| -xi / di)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dx_lp: DVector<f64>,
    dz_lp: DVector<f64>,
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
}

enum Factor {
    Chol(Cholesky<f64, Dyn>),
    Lu(nalgebra::LU<f64, Dyn, Dyn>),
}

impl Factor {
    fn new(m: DMatrix<f64>) -> Option<Factor> {
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some(Factor::Chol(c));
        }
        let dmax = m.diagonal().amax();
        let mut reg = m.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += 1e-13 * dmax.max(1e-300);
        }
        if let Some(c) = Cholesky::new(reg) {
            return Some(Factor::Chol(c));
        }
        let lu = m.lu();
        if lu.is_invertible() {
            Some(Factor::Lu(lu))
        } else {
            None
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factor::Chol(c) => Some(c.solve(rhs)),
            Factor::Lu(l) => l.solve(rhs),
        }
    }
}

struct Ipm<'a> {
    std: &'a Standard,
    opts: &'a SolverOptions,
}

struct Measures {
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    gap_rel: f64,
    mu: f64,
    rp: DVector<f64>,
    rd_lp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    ax_norm: f64,
    aty_z_norm: f64,
}

impl<'a> Ipm<'a> {
    fn measure(&self, it: &Iterate) -> Measures {
        let s = self.std;
        let ax = s.apply(&it.x_lp, &it.x);
        let rp = &s.b - &ax;
        let (aty_lp, aty) = s.apply_adjoint(&it.y);
        let rd_lp = &s.c_lp - &aty_lp - &it.z_lp;
        let rd: Vec<DMatrix<f64>> = (0..s.dims.len()).map(|k| &s.c_psd[k] - &aty[k] - &it.z[k]).collect();
        let aty_z_norm = ((&aty_lp + &it.z_lp).norm_squared()
            + (0..s.dims.len()).map(|k| (&aty[k] + &it.z[k]).norm_squared()).sum::<f64>())
        .sqrt();
        let pobj = s.c_lp.dot(&it.x_lp) + (0..s.dims.len()).map(|k| s.c_psd[k].dot(&it.x[k])).sum::<f64>();
        let dobj = s.b.dot(&it.y);
        let gap = it.x_lp.dot(&it.z_lp) + (0..s.dims.len()).map(|k| it.x[k].dot(&it.z[k])).sum::<f64>();
        let c_norm = (s.c_lp.norm_squared() + s.c_psd.iter().map(|m| m.norm_squared()).sum::<f64>()).sqrt();
        let rd_norm = (rd_lp.norm_squared() + rd.iter().map(|m| m.norm_squared()).sum::<f64>()).sqrt();
        // The gap is measured in the caller's objective units.
        let cs = s.obj_scale;
        let denom = 1.0 / cs + pobj.abs() + dobj.abs();
        Measures {
            pobj,
            dobj,
            pinf: rp.norm() / (1.0 + s.b.norm()),
            dinf: rd_norm / (1.0 + c_norm),
            gap_rel: (pobj - dobj).abs().max(gap.abs()) / denom,
            mu: gap / s.order() as f64,
            ax_norm: ax.norm(),
            rp,
            rd_lp,
            rd,
            aty_z_norm,
        }
    }

    fn schur(&self, w_lp: &DVector<f64>, scal: &[BlockScaling]) -> DMatrix<f64> {
        let s = self.std;
        let m = s.m();
        let mut h = DMatrix::zeros(m, m);
        for (l, col) in s.lp_cols.iter().enumerate() {
            let wl = w_lp[l];
            for (a, &(i, vi)) in col.iter().enumerate() {
                for &(j, vj) in &col[a..] {
                    h[(i, j)] += vi * vj * wl;
                }
            }
        }
        for (k, rows) in s.psd_rows.iter().enumerate() {
            let w = &scal[k].w;
            for (jj, &(j, pj)) in rows.iter().enumerate() {
                let t = s.rows[j].psd[pj].1.sandwich(w);
                for &(i, pi) in &rows[..=jj] {
                    h[(i, j)] += s.rows[i].psd[pi].1.dot(&t);
                }
            }
        }
        for j in 0..m {
            for i in 0..j {
                h[(j, i)] = h[(i, j)];
            }
        }
        h
    }

    /// Solves the Newton system for a scaled complementarity right-hand side
    /// given by `rc_lp` (per LP coordinate) and `rc` (per PSD block, in the
    /// scaled space).
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        meas: &Measures,
        w_lp: &DVector<f64>,
        v_lp: &DVector<f64>,
        scal: &[BlockScaling],
        factor: &Factor,
        rc_lp: &DVector<f64>,
        rc: &[DMatrix<f64>],
    ) -> Option<Direction> {
        let s = self.std;
        // U = G Y Gᵀ where V∘Y = Rc.
        // LP coordinates: G = (x/z)^{1/4}, v = √(xz), so G·(r/v)·G = r/z.
        let u_lp = DVector::from_iterator(s.n_lp, (0..s.n_lp).map(|l| rc_lp[l] * w_lp[l].sqrt() / v_lp[l]));
        let u: Vec<DMatrix<f64>> = scal
            .iter()
            .zip(rc)
            .map(|(sc, r)| {
                let n = sc.v.len();
                let y = DMatrix::from_fn(n, n, |i, j| 2.0 * r[(i, j)] / (sc.v[i] + sc.v[j]));
                sym(&sc.g * y * sc.g.transpose())
            })
            .collect();
        // rhs = rp − A(U − W Rd W)
        let t_lp = DVector::from_iterator(s.n_lp, (0..s.n_lp).map(|l| u_lp[l] - w_lp[l] * meas.rd_lp[l]));
        let t: Vec<DMatrix<f64>> =
            (0..s.dims.len()).map(|k| &u[k] - &scal[k].w * &meas.rd[k] * &scal[k].w).collect();
        let rhs = &meas.rp - s.apply(&t_lp, &t);
        let dy = factor.solve(&rhs)?;
        let (aty_lp, aty) = s.apply_adjoint(&dy);
        let dz_lp = &meas.rd_lp - aty_lp;
        let dz: Vec<DMatrix<f64>> = (0..s.dims.len()).map(|k| sym(&meas.rd[k] - &aty[k])).collect();
        let dx_lp = DVector::from_iterator(s.n_lp, (0..s.n_lp).map(|l| u_lp[l] - w_lp[l] * dz_lp[l]));
        let dx: Vec<DMatrix<f64>> =
            (0..s.dims.len()).map(|k| sym(&u[k] - &scal[k].w * &dz[k] * &scal[k].w)).collect();
        if dy.iter().chain(dx_lp.iter()).chain(dz_lp.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        Some(Direction { dx_lp, dz_lp, dx, dz, dy })
    }

    fn step_lengths(&self, it: &Iterate, scal: &[BlockScaling], d: &Direction) -> (f64, f64) {
        let mut ap = max_step_lp(&it.x_lp, &d.dx_lp);
        let mut ad = max_step_lp(&it.z_lp, &d.dz_lp);
        for (k, sc) in scal.iter().enumerate() {
            ap = ap.min(max_step_psd(&sc.lx, &d.dx[k]));
            ad = ad.min(max_step_psd(&sc.lz, &d.dz[k]));
        }
        (ap, ad)
    }

    fn run(&self) -> (Iterate, Status, Residuals, usize) {
        let s = self.std;
        let opts = self.opts;
        let mut it = Iterate::initial(s);
        let mut best = it.clone();
        let mut best_merit = f64::INFINITY;
        let mut best_res = Residuals::default();
        let mut last_steps = (1.0f64, 1.0f64);
        let mut tiny_steps = 0;

        for iter in 0..opts.max_iter {
            let meas = self.measure(&it);
            let res = Residuals { primal: meas.pinf, dual: meas.dinf, gap: meas.gap_rel };
            let merit = meas.pinf.max(meas.dinf).max(meas.gap_rel);
            trace!(
                "iter {iter}: pobj {:.10e} dobj {:.10e} pinf {:.2e} dinf {:.2e} gap {:.2e} steps {:.3}/{:.3}",
                meas.pobj, meas.dobj, meas.pinf, meas.dinf, meas.gap_rel, last_steps.0, last_steps.1
            );
            if merit.is_finite() && merit < best_merit {
                best_merit = merit;
                best = it.clone();
                best_res = res;
            }
            if meas.pinf <= opts.eps_feas && meas.dinf <= opts.eps_feas && meas.gap_rel <= opts.eps_gap {
                return (it, Status::Optimal, res, iter);
            }
            if meas.dobj > 0.0 && meas.aty_z_norm / meas.dobj.abs() < opts.eps_infeas {
                return (it, Status::Infeasible, res, iter);
            }
            if meas.pobj < 0.0 && meas.ax_norm / meas.pobj.abs() < opts.eps_infeas {
                return (it, Status::Unbounded, res, iter);
            }
            if !merit.is_finite() {
                break;
            }

            let Some(scal) = it
                .x
                .iter()
                .zip(&it.z)
                .map(|(x, z)| nt_scaling(x, z))
                .collect::<Option<Vec<_>>>()
            else {
                break;
            };
            let w_lp = it.x_lp.component_div(&it.z_lp);
            let v_lp = it.x_lp.component_mul(&it.z_lp).map(f64::sqrt);
            let Some(factor) = Factor::new(self.schur(&w_lp, &scal)) else {
                break;
            };

            // Predictor: Rc = −V².
            let rc_lp = -v_lp.component_mul(&v_lp);
            let rc: Vec<DMatrix<f64>> =
                scal.iter().map(|sc| -DMatrix::from_diagonal(&sc.v.component_mul(&sc.v))).collect();
            let Some(pred) = self.direction(&meas, &w_lp, &v_lp, &scal, &factor, &rc_lp, &rc) else {
                break;
            };
            let (ap, ad) = self.step_lengths(&it, &scal, &pred);
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let gap_aff = (&it.x_lp + &pred.dx_lp * ap).dot(&(&it.z_lp + &pred.dz_lp * ad))
                + (0..s.dims.len())
                    .map(|k| (&it.x[k] + &pred.dx[k] * ap).dot(&(&it.z[k] + &pred.dz[k] * ad)))
                    .sum::<f64>();
            let mu_aff = gap_aff / s.order() as f64;
            let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
            let sigma = (mu_aff / meas.mu).max(0.0).powf(expon).min(1.0);
            let target = sigma * meas.mu;

            // Corrector: Rc = σμI − V² − sym(ΔX̃ ΔZ̃).
            let rc_lp = DVector::from_iterator(
                s.n_lp,
                (0..s.n_lp).map(|l| target - v_lp[l] * v_lp[l] - pred.dx_lp[l] * pred.dz_lp[l]),
            );
            let rc: Vec<DMatrix<f64>> = scal
                .iter()
                .enumerate()
                .map(|(k, sc)| {
                    let n = sc.v.len();
                    let dxs = &sc.g_inv * &pred.dx[k] * sc.g_inv.transpose();
                    let dzs = sc.g.transpose() * &pred.dz[k] * &sc.g;
                    let prod = sym(&dxs * &dzs);
                    let mut r = -prod;
                    for i in 0..n {
                        r[(i, i)] += target - sc.v[i] * sc.v[i];
                    }
                    r
                })
                .collect();
            let Some(dir) = self.direction(&meas, &w_lp, &v_lp, &scal, &factor, &rc_lp, &rc) else {
                break;
            };
            let (ap, ad) = self.step_lengths(&it, &scal, &dir);
            let gamma = 0.9 + 0.09 * last_steps.0.min(last_steps.1);
            let ap = (gamma * ap).min(1.0);
            let ad = (gamma * ad).min(1.0);
            last_steps = (ap, ad);
            if ap.max(ad) < 1e-10 {
                tiny_steps += 1;
                if tiny_steps >= 3 {
                    break;
                }
            } else {
                tiny_steps = 0;
            }

            it.x_lp += &dir.dx_lp * ap;
            it.z_lp += &dir.dz_lp * ad;
            it.y += &dir.dy * ad;
            for k in 0..s.dims.len() {
                it.x[k] = sym(&it.x[k] + &dir.dx[k] * ap);
                it.z[k] = sym(&it.z[k] + &dir.dz[k] * ad);
            }
        }
        (best, Status::NumericalLimit, best_res, opts.max_iter)
    }
}

fn assemble(
    p: &ConicProblem,
    std: &Standard,
    layout: &Layout,
    it: &Iterate,
    status: Status,
    residuals: Residuals,
    iterations: usize,
) -> ConicSolution {
    let c = std.obj_scale;
    let mut blocks = Vec::with_capacity(p.blocks.len());
    let mut slack = Vec::with_capacity(p.blocks.len());
    for (kind, slot) in p.blocks.iter().zip(&layout.slots) {
        match (*kind, *slot) {
            (BlockKind::Psd(_), Slot::Psd(k)) => {
                blocks.push(BlockValue::Matrix(it.x[k].clone()));
                slack.push(BlockValue::Matrix(&it.z[k] * c));
            }
            (BlockKind::NonNeg(n), Slot::NonNeg(o)) => {
                blocks.push(BlockValue::Vector((0..n).map(|i| it.x_lp[o + i]).collect()));
                slack.push(BlockValue::Vector((0..n).map(|i| it.z_lp[o + i] * c).collect()));
            }
            (BlockKind::Free(n), Slot::Free(o)) => {
                blocks.push(BlockValue::Vector(
                    (0..n).map(|i| it.x_lp[o + 2 * i] - it.x_lp[o + 2 * i + 1]).collect(),
                ));
                slack.push(BlockValue::Vector((0..n).map(|i| it.z_lp[o + 2 * i] * c).collect()));
            }
            _ => unreachable!("layout mismatch"),
        }
    }
    let unscale = |row: usize| it.y[row] * c / std.row_scale[row];
    let eq: Vec<f64> = layout.eq_rows.iter().map(|r| r.map_or(0.0, unscale)).collect();
    let ineq: Vec<f64> = layout.ineq_rows.iter().map(|&r| unscale(r)).collect();
    let dual_objective = p.eqs.iter().zip(&eq).map(|(e, y)| e.rhs * y).sum::<f64>()
        + p.ineqs.iter().zip(&ineq).map(|(e, y)| e.rhs * y).sum::<f64>();
    let objective = p.objective.eval(&blocks);
    ConicSolution {
        status,
        blocks,
        objective,
        dual_objective,
        residuals,
        iterations,
        duals: DualMultipliers { eq, ineq, slack },
    }
}
