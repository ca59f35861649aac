//! Reflect-side subproblems over `ṽ = [v; 1]`.
//!
//! Both subproblems lift `ṽṽᴴ` to a unit-diagonal PSD matrix `Ṽ`. The
//! extended target maximizes the total SINR margin; the point target runs
//! SCA on a difference-of-convex split of the DoA Fisher term. Gaussian
//! randomization maps the relaxed `Ṽ` back to unit-modulus phases.

use conic::{ConicProblem, ConicSolution, Functional};
use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::metrics::{reflect_matrices, TxCovariance};
use crate::numerics::{c, hermitian_evd, CMatrix, CVector, HermitianMatrix};
use crate::scenario::{ChannelSet, SystemConfig};
use crate::sdp::{self, HermVar};
use crate::{ReceiverType, TargetMode};

pub const RANDOMIZATIONS: usize = 1000;
pub const SCA_TOL: f64 = 1e-4;
pub const SCA_MAX: usize = 30;

/// Relative tolerance on `ṽᴴQ_kṽ ≥ Γ_kσ_k²` when accepting a candidate.
const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ReflectProblemData {
    /// SINR forms, one per CU.
    pub q: Vec<HermitianMatrix>,
    /// Padded `R₁`, `R₂` and `D` of order N+1.
    pub r1: HermitianMatrix,
    pub r2: HermitianMatrix,
    pub d: HermitianMatrix,
    /// `Γ_kσ_k²`.
    pub gamma_sigma: Vec<f64>,
    pub mode: TargetMode,
}

#[derive(Clone, Debug)]
pub struct ReflectSolution {
    pub v: CVector,
    pub v_relaxed: Option<HermitianMatrix>,
    /// Σβ for the extended target, the SCA objective for the point target.
    pub objective_surrogate: f64,
    pub n_randomizations_tried: usize,
    pub feasible: bool,
    /// False when the safeguard handed back `v_init`.
    pub improved: bool,
    /// SCA objective after each inner iteration (point target only).
    pub surrogate_trace: Vec<f64>,
    /// Highest-scoring draw ignoring the SINR constraints at the current
    /// transmit design (point target only).
    pub unconstrained: Option<CVector>,
}

impl ReflectSolution {
    fn fallback(v_init: &CVector, feasible: bool) -> Self {
        Self {
            v: v_init.clone(),
            v_relaxed: None,
            objective_surrogate: f64::NAN,
            n_randomizations_tried: 0,
            feasible,
            improved: false,
            surrogate_trace: Vec::new(),
            unconstrained: None,
        }
    }
}

pub fn augment(v: &CVector) -> CVector {
    let n = v.len();
    CVector::from_fn(n + 1, |i, _| if i < n { v[i] } else { c(1.0) })
}

fn pad(a: &HermitianMatrix) -> HermitianMatrix {
    let n = a.dim();
    let mut m = CMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(a.matrix());
    HermitianMatrix::from_raw(m)
}

pub fn build_reflect_data(
    ch: &ChannelSet,
    tx: &TxCovariance,
    cfg: &SystemConfig,
    receiver: ReceiverType,
    mode: TargetMode,
) -> ReflectProblemData {
    let (n, m) = (ch.n(), ch.m());
    let mut q = Vec::with_capacity(ch.k());
    for k in 0..ch.k() {
        // Rows of [G̃_k*; h_d,kᵀ] with G̃_k = diag(h_r,kᴴ) G.
        let mut a = CMatrix::zeros(n + 1, m);
        for i in 0..n {
            for j in 0..m {
                a[(i, j)] = ch.h_r[k][i] * ch.g[(i, j)].conj();
            }
        }
        for j in 0..m {
            a[(n, j)] = ch.h_d[k][j];
        }
        let gamma = cfg.gamma[k];
        let mut core = tx.w[k].clone();
        for (i, w) in tx.w.iter().enumerate() {
            if i != k {
                core = core.sub(&w.scale(gamma));
            }
        }
        if receiver == ReceiverType::I {
            core = core.sub(&tx.r0.scale(gamma));
        }
        q.push(core.conj().congruence(&a));
    }
    let (r1, r2) = reflect_matrices(ch, &tx.rx());
    let d: Vec<f64> = (0..=n).map(|i| if i < n { i as f64 } else { 0.0 }).collect();
    ReflectProblemData {
        q,
        r1: pad(&r1),
        r2: pad(&r2),
        d: HermitianMatrix::from_real_diagonal(&d),
        gamma_sigma: (0..ch.k()).map(|k| cfg.gamma[k] * cfg.sigma_k_sq[k]).collect(),
        mode,
    }
}

impl ReflectProblemData {
    pub fn n(&self) -> usize {
        self.r1.dim() - 1
    }

    /// `ṽᴴQ_kṽ − Γ_kσ_k²` for every CU.
    pub fn margins(&self, v: &CVector) -> Vec<f64> {
        let vt = augment(v);
        self.q.iter().zip(&self.gamma_sigma).map(|(q, gs)| q.quad(&vt) - gs).collect()
    }

    fn row_scale(&self, k: usize) -> f64 {
        self.q[k].norm() + self.gamma_sigma[k]
    }

    /// True when every margin clears `−FEAS_TOL · scale`.
    pub fn is_feasible(&self, v: &CVector) -> bool {
        self.margins(v).iter().enumerate().all(|(k, m)| *m >= -FEAS_TOL * self.row_scale(k))
    }

    /// Denominator of the reflect-side DoA bound; larger is better.
    pub fn crb_denominator(&self, v: &CVector) -> Option<f64> {
        let vt = augment(v);
        let dv = self.d.matrix() * &vt;
        let p1 = self.r1.quad(&vt);
        let p2 = self.r2.quad(&vt);
        if !(p1 > 0.0 && p2 > 0.0) {
            return None;
        }
        let s1 = dv.dotc(&(self.r1.matrix() * &vt)).norm_sqr();
        let s2 = dv.dotc(&(self.r2.matrix() * &vt)).norm_sqr();
        Some(p2 * (self.r1.quad(&dv) - s1 / p1) + p1 * (self.r2.quad(&dv) - s2 / p2))
    }

    fn add_sinr_rows(&self, p: &mut ConicProblem, vv: &HermVar, beta: Option<(conic::BlockId, f64)>) {
        for (k, (q, gs)) in self.q.iter().zip(&self.gamma_sigma).enumerate() {
            let s = match beta {
                Some((_, common)) => common,
                None => self.row_scale(k),
            };
            let mut f = Functional::new();
            vv.add_re_tr(&mut f, q.matrix(), 1.0 / s);
            if let Some((b, _)) = beta {
                f.add_scalar(b, k, -1.0);
            }
            p.add_ge(f, gs / s);
        }
    }
}

fn add_unit_diagonal(p: &mut ConicProblem, vv: &HermVar) {
    for i in 0..vv.n {
        let mut f = Functional::new();
        vv.add_re_entry(&mut f, i, i, 1.0);
        p.add_eq(f, 1.0);
    }
}

/// Draws `count` samples `r ~ CN(0, V)` and keeps the phase pattern
/// `exp(j·arg(r_n / r_{N+1}))` with the largest score. `score` returns `None`
/// for candidates that are not acceptable.
pub fn gaussian_randomize(
    v: &HermitianMatrix,
    count: usize,
    rng: &mut ChaCha8Rng,
    mut score: impl FnMut(&CVector) -> Option<f64>,
) -> Option<(CVector, f64)> {
    if count == 0 {
        return None;
    }
    let n1 = v.dim();
    // Near-singular pivots leave L outside the range of V; use the EVD then.
    let pivot_floor = 1e-10 * v.trace();
    let chol = Cholesky::new(v.matrix().clone())
        .map(|ch| ch.l())
        .filter(|l| (0..n1).all(|i| l[(i, i)].norm_sqr() > pivot_floor));
    let factor = match chol {
        Some(l) => l,
        None => {
            let evd = hermitian_evd(v).ok()?;
            let tol = evd.rank_tol();
            let mut f = evd.vectors.clone();
            for (j, lam) in evd.values.iter().enumerate() {
                let s = if *lam > tol { lam.sqrt() } else { 0.0 };
                for i in 0..n1 {
                    f[(i, j)] *= s;
                }
            }
            f
        }
    };
    let last_tol = 1e-12 * v.trace().max(f64::MIN_POSITIVE).sqrt();
    let mut best: Option<(CVector, f64)> = None;
    for _ in 0..count {
        let r = loop {
            let z = CVector::from_fn(n1, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            });
            let r = &factor * z;
            if r[n1 - 1].norm() >= last_tol {
                break r;
            }
        };
        let anchor = r[n1 - 1].conj();
        let cand = CVector::from_fn(n1 - 1, |i, _| Complex64::from_polar(1.0, (r[i] * anchor).arg()));
        if let Some(s) = score(&cand) {
            if best.as_ref().is_none_or(|(_, b)| s > *b) {
                best = Some((cand, s));
            }
        }
    }
    best
}

fn relaxed_or_fallback(
    r: Result<ConicSolution>,
    v_init: &CVector,
    what: &str,
) -> std::result::Result<ConicSolution, ReflectSolution> {
    match r {
        Ok(sol) => Ok(sol),
        Err(Error::Infeasible(_)) => Err(ReflectSolution::fallback(v_init, false)),
        Err(e) => {
            log::debug!("{what} relaxation failed ({e}); keeping v_init");
            Err(ReflectSolution::fallback(v_init, true))
        }
    }
}

fn min_normalized_margin(data: &ReflectProblemData, v: &CVector) -> f64 {
    data.margins(v)
        .iter()
        .zip(&data.gamma_sigma)
        .map(|(m, gs)| m / gs)
        .fold(f64::INFINITY, f64::min)
}

/// Maximizes `Σβ_k` subject to `ṽᴴQ_kṽ − Γ_kσ_k² ≥ β_k ≥ 0`.
pub fn solve_reflect_extended(data: &ReflectProblemData, v_init: &CVector, seed: u64) -> ReflectSolution {
    let k = data.q.len();
    if k == 0 {
        return ReflectSolution::fallback(v_init, true);
    }
    let n1 = data.n() + 1;
    // One scale for every row keeps Σβ unweighted.
    let common = (0..k).map(|i| data.row_scale(i)).fold(0.0, f64::max);
    let mut p = ConicProblem::new();
    let vv = HermVar::new(&mut p, n1);
    let beta = p.nonneg(k);
    add_unit_diagonal(&mut p, &vv);
    data.add_sinr_rows(&mut p, &vv, Some((beta, common)));
    let mut obj = Functional::new();
    for i in 0..k {
        obj.add_scalar(beta, i, 1.0);
    }
    p.maximize(obj);
    let sol = match relaxed_or_fallback(sdp::solve(&p, "reflect margin"), v_init, "reflect margin") {
        Ok(s) => s,
        Err(fb) => return fb,
    };
    let relaxed = vv.value(&sol);
    let bound = common * sol.vector(beta).iter().sum::<f64>();

    let floor = min_normalized_margin(data, v_init);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5eed);
    let best = gaussian_randomize(&relaxed, RANDOMIZATIONS, &mut rng, |cand| {
        if !data.is_feasible(cand) || min_normalized_margin(data, cand) < floor {
            return None;
        }
        let total: f64 = data.margins(cand).iter().sum();
        if total > bound * (1.0 + 1e-6) + 1e-9 * common {
            log::warn!("randomized margin {total:e} exceeds relaxation bound {bound:e}");
        }
        Some(total)
    });
    match best {
        Some((v, _)) => ReflectSolution {
            v,
            v_relaxed: Some(relaxed),
            objective_surrogate: bound,
            n_randomizations_tried: RANDOMIZATIONS,
            feasible: true,
            improved: true,
            surrogate_trace: Vec::new(),
            unconstrained: None,
        },
        None => ReflectSolution {
            v_relaxed: Some(relaxed),
            objective_surrogate: bound,
            n_randomizations_tried: RANDOMIZATIONS,
            ..ReflectSolution::fallback(v_init, data.is_feasible(v_init))
        },
    }
}

/// `Re tr(C Ṽ) + a·t₁ + b·t₂`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub c: HermitianMatrix,
    pub t1: f64,
    pub t2: f64,
}

impl Linear {
    pub fn eval(&self, v: &HermitianMatrix, t1: f64, t2: f64) -> f64 {
        self.c.trace_product(v.matrix()) + self.t1 * t1 + self.t2 * t2
    }
}

/// The two halves of the SCA objective. `f₁` collects the convex squares,
/// `f₂` the concave ones; each term is `±¼ ℓ²` for an affine `ℓ`.
#[derive(Clone, Debug)]
pub struct DcSplit {
    pub convex: [Linear; 4],
    pub concave: [Linear; 4],
    /// Normalized `R̃₁`, `R̃₂` and the cross terms `D̃R̃₁`, `D̃R̃₂`.
    pub r1: HermitianMatrix,
    pub r2: HermitianMatrix,
    pub dr1: CMatrix,
    pub dr2: CMatrix,
    /// `‖R̃₁‖·‖R̃₂‖`, undoing the normalization.
    pub scale: f64,
}

impl DcSplit {
    pub fn new(data: &ReflectProblemData) -> Self {
        let (s1, s2) = (data.r1.norm(), data.r2.norm());
        let r1 = data.r1.scale(1.0 / s1);
        let r2 = data.r2.scale(1.0 / s2);
        let d = data.d.matrix();
        let q1 = r1.congruence(d);
        let q2 = r2.congruence(d);
        let lin = |c: HermitianMatrix, t1: f64, t2: f64| Linear { c, t1, t2 };
        Self {
            convex: [
                lin(r2.add(&q1), 0.0, 0.0),
                lin(r2.clone(), -1.0, 0.0),
                lin(r1.add(&q2), 0.0, 0.0),
                lin(r1.clone(), 0.0, -1.0),
            ],
            concave: [
                lin(r2.sub(&q1), 0.0, 0.0),
                lin(r2.clone(), 1.0, 0.0),
                lin(r1.sub(&q2), 0.0, 0.0),
                lin(r1.clone(), 0.0, 1.0),
            ],
            dr1: d * r1.matrix(),
            dr2: d * r2.matrix(),
            r1,
            r2,
            scale: s1 * s2,
        }
    }

    pub fn f1(&self, v: &HermitianMatrix, t1: f64, t2: f64) -> f64 {
        self.convex.iter().map(|l| 0.25 * l.eval(v, t1, t2).powi(2)).sum()
    }

    pub fn f2(&self, v: &HermitianMatrix, t1: f64, t2: f64) -> f64 {
        self.concave.iter().map(|l| -0.25 * l.eval(v, t1, t2).powi(2)).sum()
    }

    /// First-order expansion of `f₁` at `at`, evaluated at `(v, t1, t2)`.
    pub fn f1_hat(&self, at: (&HermitianMatrix, f64, f64), v: &HermitianMatrix, t1: f64, t2: f64) -> f64 {
        let (v0, a1, a2) = at;
        self.convex
            .iter()
            .map(|l| {
                let l0 = l.eval(v0, a1, a2);
                0.25 * l0 * l0 + 0.5 * l0 * (l.eval(v, t1, t2) - l0)
            })
            .sum()
    }

    /// Initial epigraph values `|tr(D̃R̃Ṽ)|² / tr(R̃Ṽ)`.
    pub fn tight_t(&self, v: &HermitianMatrix) -> (f64, f64) {
        let t = |dr: &CMatrix, r: &HermitianMatrix| {
            let p = r.trace_product(v.matrix());
            if p > 0.0 {
                (dr * v.matrix()).trace().norm_sqr() / p
            } else {
                0.0
            }
        };
        (t(&self.dr1, &self.r1), t(&self.dr2, &self.r2))
    }
}

struct ScaIterate {
    v: HermitianMatrix,
    t1: f64,
    t2: f64,
    value: f64,
}

fn sca_step(
    data: &ReflectProblemData,
    split: &DcSplit,
    at: &ScaIterate,
) -> Result<ScaIterate> {
    let n1 = data.n() + 1;
    let mut p = ConicProblem::new();
    let vv = HermVar::new(&mut p, n1);
    let lmi1 = HermVar::new(&mut p, 2);
    let lmi2 = HermVar::new(&mut p, 2);
    let epi: Vec<_> = (0..4).map(|_| p.psd(2)).collect();
    add_unit_diagonal(&mut p, &vv);
    data.add_sinr_rows(&mut p, &vv, None);

    // [[t, tr(D̃R̃Ṽ)], [·, tr(R̃Ṽ)]] ⪰ 0.
    for (lmi, r, dr) in [(&lmi1, &split.r1, &split.dr1), (&lmi2, &split.r2, &split.dr2)] {
        let mut f = Functional::new();
        lmi.add_re_entry(&mut f, 1, 1, 1.0);
        vv.add_re_tr(&mut f, r.matrix(), -1.0);
        p.add_eq(f, 0.0);
        let mut f = Functional::new();
        lmi.add_re_entry(&mut f, 0, 1, 1.0);
        vv.add_re_tr(&mut f, dr, -1.0);
        p.add_eq(f, 0.0);
        let mut f = Functional::new();
        lmi.add_im_entry(&mut f, 0, 1, 1.0);
        vv.add_im_tr(&mut f, dr, -1.0);
        p.add_eq(f, 0.0);
    }
    let add_linear = |f: &mut Functional, l: &Linear, s: f64| {
        vv.add_re_tr(f, l.c.matrix(), s);
        lmi1.add_re_entry(f, 0, 0, s * l.t1);
        lmi2.add_re_entry(f, 0, 0, s * l.t2);
    };

    // [[e, ℓ/2], [ℓ/2, 1]] ⪰ 0 gives e ≥ ℓ²/4.
    for (l, &e) in split.concave.iter().zip(&epi) {
        p.add_eq(Functional::new().entry(e, 1, 1, 1.0), 1.0);
        let mut f = Functional::new().entry(e, 0, 1, 1.0);
        add_linear(&mut f, l, -0.5);
        p.add_eq(f, 0.0);
    }
    let mut obj = Functional::new();
    for l in &split.convex {
        add_linear(&mut obj, l, 0.5 * l.eval(&at.v, at.t1, at.t2));
    }
    for &e in &epi {
        obj.add_entry(e, 0, 0, -1.0);
    }
    p.maximize(obj);

    let sol = sdp::solve(&p, "reflect SCA")?;
    let v = vv.value(&sol);
    let t1 = lmi1.value(&sol).matrix()[(0, 0)].re;
    let t2 = lmi2.value(&sol).matrix()[(0, 0)].re;
    let value = split.f1(&v, t1, t2) + split.f2(&v, t1, t2);
    Ok(ScaIterate { v, t1, t2, value })
}

/// SCA over the lifted point-target DoA objective, followed by
/// randomization scored by the true bound.
pub fn solve_reflect_point_sca(data: &ReflectProblemData, v_init: &CVector, seed: u64) -> ReflectSolution {
    let split = DcSplit::new(data);
    let start = HermitianMatrix::outer(&augment(v_init));
    let (t1, t2) = split.tight_t(&start);
    let value = split.f1(&start, t1, t2) + split.f2(&start, t1, t2);
    let mut cur = ScaIterate { v: start, t1, t2, value };
    let mut trace = vec![cur.value];
    for r in 0..SCA_MAX {
        let next = match sca_step(data, &split, &cur) {
            Ok(x) => x,
            Err(Error::Infeasible(_)) if r == 0 => return ReflectSolution::fallback(v_init, false),
            Err(e) => {
                log::debug!("SCA iteration {r} stopped: {e}");
                break;
            }
        };
        let change = (next.value - cur.value).abs() / cur.value.abs().max(f64::MIN_POSITIVE);
        trace.push(next.value);
        cur = next;
        if change < SCA_TOL {
            break;
        }
    }
    let baseline = data.crb_denominator(v_init).unwrap_or(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5ca);
    let mut feasible = 0;
    let mut unconstrained: Option<(CVector, f64)> = None;
    let best = gaussian_randomize(&cur.v, RANDOMIZATIONS, &mut rng, |cand| {
        let d = data.crb_denominator(cand)?;
        if unconstrained.as_ref().is_none_or(|(_, b)| d > *b) {
            unconstrained = Some((cand.clone(), d));
        }
        if !data.is_feasible(cand) {
            return None;
        }
        feasible += 1;
        Some(d).filter(|d| *d > baseline)
    });
    log::debug!(
        "SCA: {} iterations, {feasible}/{RANDOMIZATIONS} feasible candidates, best {:?} vs {baseline:e}",
        trace.len() - 1,
        best.as_ref().map(|b| b.1)
    );
    let surrogate = cur.value * split.scale;
    let base = ReflectSolution {
        v: v_init.clone(),
        v_relaxed: Some(cur.v),
        objective_surrogate: surrogate,
        n_randomizations_tried: RANDOMIZATIONS,
        feasible: data.is_feasible(v_init),
        improved: false,
        surrogate_trace: trace.iter().map(|x| x * split.scale).collect(),
        unconstrained: unconstrained.filter(|(_, d)| *d > baseline).map(|(v, _)| v),
    };
    match best {
        Some((v, _)) => ReflectSolution { v, feasible: true, improved: true, ..base },
        None => base,
    }
}

/// Dispatches on the data's target mode.
pub fn solve_reflect(data: &ReflectProblemData, v_init: &CVector, seed: u64) -> ReflectSolution {
    match data.mode {
        TargetMode::Extended => solve_reflect_extended(data, v_init, seed),
        TargetMode::Point => solve_reflect_point_sca(data, v_init, seed),
    }
}
