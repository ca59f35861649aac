//! Transmit beamforming at a fixed reflection vector.
//!
//! Each design is solved as a semidefinite relaxation over `W_k` and `R0`
//! and mapped back to rank-one beams by [`extract_rank_one`], which keeps
//! the transmit covariance and every CU's useful signal power unchanged.
//!
//! Relaxations run in normalized units: covariances are divided by `P0`,
//! channels by their norms and `G` by its RMS row norm.

use conic::{BlockId, ConicProblem, Functional, Status};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::metrics::{crb_extended, crb_point_tx_form, TxCovariance};
use crate::numerics::{c, trace_inverse, CMatrix, CVector, HermitianMatrix, RANK_TOL};
use crate::scenario::{combined_channel, steering, steering_derivative, ChannelSet, SystemConfig};
use crate::sdp::{self, HermVar};
use crate::{ReceiverType, TargetMode};

#[derive(Clone, Debug)]
pub struct TxSolution {
    pub w: Vec<CVector>,
    pub r0: HermitianMatrix,
    /// Relaxed covariance before rank-one recovery.
    pub relaxed: Option<TxCovariance>,
    /// CRB (or transmit power for the power-minimization design) of the
    /// returned beams.
    pub objective: f64,
    /// The same quantity at the relaxation optimum.
    pub sdr_objective: f64,
    pub solver_status: Status,
    /// CUs whose relaxed beam carried no power along their channel.
    pub degenerate: Vec<usize>,
}

impl TxSolution {
    pub fn covariance(&self) -> TxCovariance {
        TxCovariance::from_beams(&self.w, self.r0.clone())
    }

    pub fn power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum::<f64>() + self.r0.trace()
    }
}

/// Rank-one beams recovered from a relaxed solution.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub w: Vec<CVector>,
    pub r0: HermitianMatrix,
    pub degenerate: Vec<usize>,
}

/// `w_k = (h_kᴴW_kh_k)^{-1/2} W_k h_k` and `R0 = R0★ + ΣW_k★ − Σw_kw_kᴴ`.
pub fn extract_rank_one(relaxed: &TxCovariance, h: &[CVector]) -> Result<Extraction> {
    if relaxed.w.len() != h.len() {
        return Err(Error::InvalidInput(format!("{} relaxed beams for {} channels", relaxed.w.len(), h.len())));
    }
    let m = relaxed.r0.dim();
    let mut w = Vec::with_capacity(h.len());
    let mut degenerate = Vec::new();
    for (k, (wk, hk)) in relaxed.w.iter().zip(h).enumerate() {
        let gain = wk.quad(hk);
        let tol = RANK_TOL * wk.trace().abs().max(f64::MIN_POSITIVE) * hk.norm_squared();
        if gain > tol {
            let beam = wk.matrix() * hk / c(gain.sqrt());
            w.push(fix_phase(beam));
        } else {
            if wk.trace() > RANK_TOL * relaxed.rx().trace() {
                log::warn!("beam {k} carries no power along its channel; folding it into R0");
            }
            degenerate.push(k);
            w.push(CVector::zeros(m));
        }
    }
    let mut r0 = relaxed.rx().into_matrix();
    for wk in &w {
        r0 -= wk * wk.adjoint();
    }
    Ok(Extraction { w, r0: HermitianMatrix::from_raw(r0), degenerate })
}

/// Makes the first significant entry real and nonnegative.
fn fix_phase(w: CVector) -> CVector {
    let tol = 1e-12 * w.norm();
    match w.iter().find(|z| z.norm() > tol) {
        Some(z) => {
            let rot = z.conj() / c(z.norm());
            w * rot
        }
        None => w,
    }
}

/// Moves `R0★` into the beam of the CU that sees the most of it.
pub fn restructure_r0_zero(relaxed: &TxCovariance, h: &[CVector]) -> TxCovariance {
    if relaxed.w.is_empty() {
        return relaxed.clone();
    }
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (k, hk) in h.iter().enumerate() {
        let val = relaxed.r0.quad(hk);
        if val > best_val {
            best = k;
            best_val = val;
        }
    }
    let mut w = relaxed.w.clone();
    w[best] = w[best].add(&relaxed.r0);
    TxCovariance::new(w, HermitianMatrix::zeros(relaxed.r0.dim()))
}

/// `h₁ᴴ R0 h₁`.
pub fn check_sensing_null_space(sol: &TxSolution, h1: &CVector) -> f64 {
    sol.r0.quad(h1)
}

pub fn channels(ch: &ChannelSet, v: &CVector) -> Result<Vec<CVector>> {
    (0..ch.k()).map(|k| combined_channel(ch, v, k)).collect()
}

enum Beams {
    Free(Vec<HermVar>),
    /// `W_k = a·base_k` with a shared scalar `a ≥ 1`.
    Scaled { a: BlockId, base: Vec<HermitianMatrix> },
}

#[derive(Clone, Copy)]
enum Part {
    Re,
    Im,
}

/// Total beam power, or `p0` when there are no beams to scale.
fn beam_power(beams: &[CVector], p0: f64) -> f64 {
    let total: f64 = beams.iter().map(|b| b.norm_squared()).sum();
    if total > 0.0 { total } else { p0 }
}

struct TxModel {
    p: ConicProblem,
    beams: Beams,
    r0: Option<HermVar>,
    p0: f64,
}

impl TxModel {
    fn free(m: usize, k: usize, with_r0: bool, p0: f64) -> Self {
        let mut p = ConicProblem::new();
        let w = (0..k).map(|_| HermVar::new(&mut p, m)).collect();
        let r0 = with_r0.then(|| HermVar::new(&mut p, m));
        Self { p, beams: Beams::Free(w), r0, p0 }
    }

    fn scaled(beams: &[CVector], p0: f64) -> Self {
        let mut p = ConicProblem::new();
        let m = beams.first().map_or(0, |b| b.len());
        // The variable is the beams' share of P0, so it stays in [total/P0, 1].
        let total = beam_power(beams, p0);
        let a = p.nonneg(1);
        p.add_ge(Functional::new().scalar(a, 0, 1.0), total / p0);
        let base = beams.iter().map(|b| HermitianMatrix::outer(b).scale(1.0 / total)).collect();
        let r0 = Some(HermVar::new(&mut p, m));
        Self { p, beams: Beams::Scaled { a, base }, r0, p0 }
    }

    fn k(&self) -> usize {
        match &self.beams {
            Beams::Free(w) => w.len(),
            Beams::Scaled { base, .. } => base.len(),
        }
    }

    fn add_herm(v: &HermVar, f: &mut Functional, cm: &CMatrix, s: f64, part: Part) {
        match part {
            Part::Re => v.add_re_tr(f, cm, s),
            Part::Im => v.add_im_tr(f, cm, s),
        }
    }

    /// Adds `s · {Re, Im} tr(C W_k)`.
    fn add_w(&self, f: &mut Functional, k: usize, cm: &CMatrix, s: f64, part: Part) {
        match &self.beams {
            Beams::Free(w) => Self::add_herm(&w[k], f, cm, s, part),
            Beams::Scaled { a, base } => {
                let t: Complex64 = (cm * base[k].matrix()).trace();
                let val = match part {
                    Part::Re => t.re,
                    Part::Im => t.im,
                };
                f.add_scalar(*a, 0, s * val);
            }
        }
    }

    fn add_r0(&self, f: &mut Functional, cm: &CMatrix, s: f64, part: Part) {
        if let Some(r0) = &self.r0 {
            Self::add_herm(r0, f, cm, s, part);
        }
    }

    /// Adds `s · {Re, Im} tr(C R_x)`.
    fn add_rx(&self, f: &mut Functional, cm: &CMatrix, s: f64, part: Part) {
        for k in 0..self.k() {
            self.add_w(f, k, cm, s, part);
        }
        self.add_r0(f, cm, s, part);
    }

    fn add_sinr(&mut self, h: &[CVector], cfg: &SystemConfig, receiver: ReceiverType) -> Result<()> {
        for (k, hk) in h.iter().enumerate() {
            let norm_sq = hk.norm_squared();
            if !(norm_sq > 0.0) {
                return Err(Error::Infeasible(format!("CU {k} has a zero channel")));
            }
            let hn = hk / c(norm_sq.sqrt());
            let hh = &hn * hn.adjoint();
            let gamma = cfg.gamma[k];
            let mut f = Functional::new();
            match receiver {
                ReceiverType::I => {
                    self.add_w(&mut f, k, &hh, 1.0 + 1.0 / gamma, Part::Re);
                    self.add_rx(&mut f, &hh, -1.0, Part::Re);
                }
                ReceiverType::II => {
                    self.add_w(&mut f, k, &hh, 1.0 / gamma, Part::Re);
                    for i in (0..self.k()).filter(|&i| i != k) {
                        self.add_w(&mut f, i, &hh, -1.0, Part::Re);
                    }
                }
            }
            self.p.add_ge(f, cfg.sigma_k_sq[k] / (self.p0 * norm_sq));
        }
        Ok(())
    }

    fn power_functional(&self, m: usize) -> Functional {
        let mut f = Functional::new();
        self.add_rx(&mut f, &CMatrix::identity(m, m), 1.0, Part::Re);
        f
    }

    fn add_power(&mut self, m: usize) {
        let f = self.power_functional(m);
        self.p.add_le(f, 1.0);
    }

    /// Minimizes `tr((G R_x Gᴴ)⁻¹)` through `[[Z/s, I/√s], [I/√s, G R_x Gᴴ]] ⪰ 0`
    /// with `s = z_scale`. Returns the factor turning the normalized optimum
    /// into natural units.
    fn attach_extended(&mut self, g: &CMatrix, z_scale: f64) -> f64 {
        let n = g.nrows();
        let gs = g.norm_squared() / n as f64;
        let gn = g / c(gs.sqrt());
        let l = HermVar::new(&mut self.p, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let mut re = Functional::new();
                l.add_re_entry(&mut re, i, n + j, 1.0);
                self.p.add_eq(re, if i == j { 1.0 / z_scale.sqrt() } else { 0.0 });
                let mut im = Functional::new();
                l.add_im_entry(&mut im, i, n + j, 1.0);
                self.p.add_eq(im, 0.0);
            }
        }
        for i in 0..n {
            for j in i..n {
                // (G X Gᴴ)[i,j] = tr(X · conj(g_j) g_iᵀ) with g the rows of G.
                let gi = gn.row(i).transpose();
                let gj = gn.row(j).transpose().map(|z| z.conj());
                let cm = &gj * gi.transpose();
                let mut re = Functional::new();
                l.add_re_entry(&mut re, n + i, n + j, 1.0);
                self.add_rx(&mut re, &cm, -1.0, Part::Re);
                self.p.add_eq(re, 0.0);
                if i != j {
                    let mut im = Functional::new();
                    l.add_im_entry(&mut im, n + i, n + j, 1.0);
                    self.add_rx(&mut im, &cm, -1.0, Part::Im);
                    self.p.add_eq(im, 0.0);
                }
            }
        }
        let mut obj = Functional::new();
        for i in 0..n {
            l.add_re_entry(&mut obj, i, i, 1.0);
        }
        self.p.minimize(obj);
        z_scale / (gs * self.p0)
    }

    /// Maximizes `u` subject to
    /// `[[tr(Ḃ R Ḃᴴ) − u, tr(B R Ḃᴴ)], [·, tr(B R Bᴴ)]] ⪰ 0`
    /// by minimizing `L₀₀ − tr(Ḃ R Ḃᴴ)` over a 2×2 Hermitian `L`.
    /// Returns the factor turning `−objective` into the Fisher term.
    fn attach_point(&mut self, b: &CVector, bd: &CVector) -> f64 {
        let nb = b.norm();
        let nd = bd.norm();
        let bm = b * b.transpose() / c(nb * nb);
        let bdm = (bd * b.transpose() + b * bd.transpose()) / c(nb * nd);
        let l = HermVar::new(&mut self.p, 2);
        let cross = bdm.adjoint() * &bm;
        let mut re = Functional::new();
        l.add_re_entry(&mut re, 0, 1, 1.0);
        self.add_rx(&mut re, &cross, -1.0, Part::Re);
        self.p.add_eq(re, 0.0);
        let mut im = Functional::new();
        l.add_im_entry(&mut im, 0, 1, 1.0);
        self.add_rx(&mut im, &cross, -1.0, Part::Im);
        self.p.add_eq(im, 0.0);
        let mut bb = Functional::new();
        l.add_re_entry(&mut bb, 1, 1, 1.0);
        self.add_rx(&mut bb, &(bm.adjoint() * &bm), -1.0, Part::Re);
        self.p.add_eq(bb, 0.0);
        let mut obj = Functional::new();
        l.add_re_entry(&mut obj, 0, 0, 1.0);
        self.add_rx(&mut obj, &(bdm.adjoint() * &bdm), -1.0, Part::Re);
        self.p.minimize(obj);
        nb * nb * nd * nd * self.p0
    }

    fn recover(&self, sol: &conic::ConicSolution, m: usize) -> TxCovariance {
        let p0 = self.p0;
        let w = match &self.beams {
            Beams::Free(w) => w.iter().map(|v| v.value(sol).scale(p0)).collect(),
            Beams::Scaled { a, base } => {
                let a = sol.vector(*a)[0];
                base.iter().map(|b| b.scale(a * p0)).collect()
            }
        };
        let r0 = self.r0.map_or_else(|| HermitianMatrix::zeros(m), |r| r.value(sol).scale(p0));
        TxCovariance::new(w, r0)
    }
}

/// `b = Gᵀ diag(v) a(θ)` and its θ-derivative.
pub fn point_vectors(ch: &ChannelSet, v: &CVector) -> (CVector, CVector) {
    let gtp = ch.g.transpose() * CMatrix::from_diagonal(v);
    let b = &gtp * steering(ch.theta, ch.n(), ch.d_over_lambda);
    let bd = &gtp * steering_derivative(ch.theta, ch.n(), ch.d_over_lambda);
    (b, bd)
}

fn crb_of(ch: &ChannelSet, v: &CVector, tx: &TxCovariance, cfg: &SystemConfig, mode: TargetMode) -> f64 {
    match mode {
        TargetMode::Extended => crb_extended(&ch.g, tx, cfg.sigma_r_sq, cfg.t).crb_value,
        TargetMode::Point => crb_point_tx_form(ch, v, tx, cfg.sigma_r_sq, cfg.t).crb_value,
    }
}

fn check_inputs(ch: &ChannelSet, v: &CVector, cfg: &SystemConfig) -> Result<()> {
    if ch.m() != cfg.m || ch.n() != cfg.n || ch.k() != cfg.gamma.len() || ch.k() != cfg.sigma_k_sq.len() {
        return Err(Error::InvalidInput("channel set does not match the configuration".into()));
    }
    if v.len() != ch.n() {
        return Err(Error::InvalidInput(format!("reflection vector has length {}, expected {}", v.len(), ch.n())));
    }
    Ok(())
}

fn require_full_row_rank(g: &CMatrix) -> Result<()> {
    trace_inverse(&HermitianMatrix::from_raw(g * g.adjoint()))
        .map(|_| ())
        .map_err(|_| Error::Infeasible("rank(G) < N leaves the extended-target CRB unbounded".into()))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    ch: &ChannelSet,
    v: &CVector,
    cfg: &SystemConfig,
    receiver: ReceiverType,
    mode: TargetMode,
    relaxed: TxCovariance,
    h: &[CVector],
    sdr_objective: f64,
    status: Status,
) -> Result<TxSolution> {
    let base = match receiver {
        ReceiverType::I => restructure_r0_zero(&relaxed, h),
        ReceiverType::II => relaxed.clone(),
    };
    let ex = extract_rank_one(&base, h)?;
    let tx = TxCovariance::from_beams(&ex.w, ex.r0.clone());
    Ok(TxSolution {
        objective: crb_of(ch, v, &tx, cfg, mode),
        w: ex.w,
        r0: ex.r0,
        relaxed: Some(relaxed),
        sdr_objective,
        solver_status: status,
        degenerate: ex.degenerate,
    })
}

/// With one CU the interference-free relaxation has the Type-I optimum, and
/// folding its sensing part into the beam recovers a Type-I design. Both
/// receivers then solve the same program.
fn relaxation_receiver(h: &[CVector], receiver: ReceiverType) -> ReceiverType {
    if h.len() == 1 {
        ReceiverType::II
    } else {
        receiver
    }
}

/// Minimizes the extended-target CRB subject to SINR and power constraints.
pub fn solve_tx_extended(ch: &ChannelSet, v: &CVector, cfg: &SystemConfig, receiver: ReceiverType) -> Result<TxSolution> {
    check_inputs(ch, v, cfg)?;
    require_full_row_rank(&ch.g)?;
    let h = channels(ch, v)?;
    let build = |z_scale: f64| -> Result<(TxModel, f64)> {
        let mut model = TxModel::free(cfg.m, cfg.k, true, cfg.p0);
        model.add_sinr(&h, cfg, relaxation_receiver(&h, receiver))?;
        model.add_power(cfg.m);
        let to_natural = model.attach_extended(&ch.g, z_scale);
        Ok((model, to_natural))
    };
    let (model, to_natural, sol) = solve_extended(ch.n(), build, "extended transmit")?;
    let relaxed = model.recover(&sol, cfg.m);
    let tr_inv_gg = trace_inverse(&HermitianMatrix::from_raw(&ch.g * ch.g.adjoint()))?;
    let sdr = cfg.sigma_r_sq / cfg.t as f64 * sol.objective * to_natural * tr_inv_gg;
    finish(ch, v, cfg, receiver, TargetMode::Extended, relaxed, &h, sdr, sol.status)
}

/// Solves an extended-target model, rebuilding it once with the inverse
/// block rescaled to the stalled optimum when the first attempt stalls.
fn solve_extended(
    n: usize,
    build: impl Fn(f64) -> Result<(TxModel, f64)>,
    what: &str,
) -> Result<(TxModel, f64, conic::ConicSolution)> {
    let (model, to_natural) = build(1.0)?;
    let sol = sdp::solve_raw(&model.p)?;
    let z_scale = sol.objective / n as f64;
    if sol.status != Status::NumericalLimit || !(z_scale.is_finite() && z_scale > 0.0) {
        return Ok((model, to_natural, sdp::classify(sol, what)?));
    }
    log::debug!("{what}: retrying with inverse block scaled by {z_scale:e}");
    let (model, to_natural) = build(z_scale)?;
    let sol = sdp::classify(sdp::solve_raw(&model.p)?, what)?;
    Ok((model, to_natural, sol))
}

fn point_geometry(ch: &ChannelSet, v: &CVector) -> Result<(CVector, CVector)> {
    let (b, bd) = point_vectors(ch, v);
    let scale = ch.g.norm() * (ch.n() as f64).sqrt();
    if !(b.norm() > 1e-12 * scale) || !(bd.norm() > 1e-12 * scale) {
        return Err(Error::DegenerateGeometry("target is not illuminated through the IRS".into()));
    }
    Ok((b, bd))
}

/// CRB at the Fisher term `j` of the point model.
fn point_crb_from_fisher(ch: &ChannelSet, cfg: &SystemConfig, j: f64) -> f64 {
    if j > 0.0 {
        cfg.sigma_r_sq / (2.0 * cfg.t as f64 * ch.alpha.norm_sqr() * j)
    } else {
        f64::INFINITY
    }
}

/// Minimizes the point-target DoA CRB subject to SINR and power constraints.
pub fn solve_tx_point(ch: &ChannelSet, v: &CVector, cfg: &SystemConfig, receiver: ReceiverType) -> Result<TxSolution> {
    check_inputs(ch, v, cfg)?;
    let (b, bd) = point_geometry(ch, v)?;
    let h = channels(ch, v)?;
    let mut model = TxModel::free(cfg.m, cfg.k, true, cfg.p0);
    model.add_sinr(&h, cfg, relaxation_receiver(&h, receiver))?;
    model.add_power(cfg.m);
    let to_fisher = model.attach_point(&b, &bd);
    let sol = sdp::solve(&model.p, "point transmit")?;
    let relaxed = model.recover(&sol, cfg.m);
    let sdr = point_crb_from_fisher(ch, cfg, -sol.objective * to_fisher);
    finish(ch, v, cfg, receiver, TargetMode::Point, relaxed, &h, sdr, sol.status)
}

pub fn solve_tx(
    ch: &ChannelSet,
    v: &CVector,
    cfg: &SystemConfig,
    mode: TargetMode,
    receiver: ReceiverType,
) -> Result<TxSolution> {
    match mode {
        TargetMode::Extended => solve_tx_extended(ch, v, cfg, receiver),
        TargetMode::Point => solve_tx_point(ch, v, cfg, receiver),
    }
}

/// Minimum-power beams meeting every SINR target with no sensing signal.
/// `objective` and `sdr_objective` are transmit powers in watts.
pub fn solve_power_min(ch: &ChannelSet, v: &CVector, cfg: &SystemConfig) -> Result<TxSolution> {
    check_inputs(ch, v, cfg)?;
    let h = channels(ch, v)?;
    let mut model = TxModel::free(cfg.m, cfg.k, false, cfg.p0);
    // Without R0 both receiver types share one SINR expression.
    model.add_sinr(&h, cfg, ReceiverType::II)?;
    let obj = model.power_functional(cfg.m);
    model.p.minimize(obj);
    let sol = sdp::solve(&model.p, "power minimization")?;
    let relaxed = model.recover(&sol, cfg.m);
    let ex = extract_rank_one(&relaxed, &h)?;
    let power = ex.w.iter().map(|w| w.norm_squared()).sum::<f64>();
    Ok(TxSolution {
        w: ex.w,
        r0: HermitianMatrix::zeros(cfg.m),
        objective: power,
        sdr_objective: relaxed.power(),
        relaxed: Some(relaxed),
        solver_status: sol.status,
        degenerate: ex.degenerate,
    })
}

/// Keeps the beam directions fixed, scales them by a common `sqrt(a)` with
/// `a ≥ 1` and adds a sensing covariance to minimize the CRB.
pub fn solve_sensing_allocation(
    ch: &ChannelSet,
    v: &CVector,
    cfg: &SystemConfig,
    mode: TargetMode,
    receiver: ReceiverType,
    beams: &[CVector],
) -> Result<(TxSolution, f64)> {
    check_inputs(ch, v, cfg)?;
    if beams.len() != cfg.k {
        return Err(Error::InvalidInput(format!("{} beams for K={}", beams.len(), cfg.k)));
    }
    let h = channels(ch, v)?;
    let base = || -> Result<TxModel> {
        let mut model = TxModel::scaled(beams, cfg.p0);
        model.add_sinr(&h, cfg, receiver)?;
        model.add_power(cfg.m);
        Ok(model)
    };
    let (model, sol, sdr) = match mode {
        TargetMode::Extended => {
            require_full_row_rank(&ch.g)?;
            let build = |z_scale: f64| -> Result<(TxModel, f64)> {
                let mut model = base()?;
                let to_natural = model.attach_extended(&ch.g, z_scale);
                Ok((model, to_natural))
            };
            let (model, _, sol) = solve_extended(ch.n(), build, "sensing allocation")?;
            (model, sol, None)
        }
        TargetMode::Point => {
            let (b, bd) = point_geometry(ch, v)?;
            let mut model = base()?;
            let f = model.attach_point(&b, &bd);
            let sol = sdp::solve(&model.p, "sensing allocation")?;
            (model, sol, Some(f))
        }
    };
    let Beams::Scaled { a, .. } = &model.beams else { unreachable!() };
    let a = sol.vector(*a)[0] * cfg.p0 / beam_power(beams, cfg.p0);
    let relaxed = model.recover(&sol, cfg.m);
    let w: Vec<CVector> = beams.iter().map(|b| b * c(a.sqrt())).collect();
    let tx = TxCovariance::from_beams(&w, relaxed.r0.clone());
    let objective = crb_of(ch, v, &tx, cfg, mode);
    let sdr_objective = match sdr {
        Some(f) => point_crb_from_fisher(ch, cfg, -sol.objective * f),
        None => objective,
    };
    Ok((
        TxSolution {
            w,
            r0: relaxed.r0.clone(),
            relaxed: Some(relaxed),
            objective,
            sdr_objective,
            solver_status: sol.status,
            degenerate: Vec::new(),
        },
        a,
    ))
}

/// Smallest ratio of achieved to required SINR across CUs.
pub fn min_sinr_ratio(
    ch: &ChannelSet,
    v: &CVector,
    tx: &TxCovariance,
    cfg: &SystemConfig,
    receiver: ReceiverType,
) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for k in 0..ch.k() {
        let s = crate::metrics::sinr(ch, v, tx, k, receiver, cfg.sigma_k_sq[k])?;
        worst = worst.min(s / cfg.gamma[k]);
    }
    Ok(worst)
}
