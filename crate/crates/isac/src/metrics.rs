//! SINR and Cramér-Rao bounds for both target models.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{c, kron, real_embed_general, trace_inverse, CMatrix, CVector, HermitianMatrix, J, RANK_TOL};
use crate::scenario::{combined_channel, steering, steering_derivative, ChannelSet};
use crate::ReceiverType;

/// Transmit covariance split into information beams and a sensing part.
#[derive(Clone, Debug, PartialEq)]
pub struct TxCovariance {
    pub w: Vec<HermitianMatrix>,
    pub r0: HermitianMatrix,
}

impl TxCovariance {
    pub fn new(w: Vec<HermitianMatrix>, r0: HermitianMatrix) -> Self {
        Self { w, r0 }
    }

    pub fn from_beams(beams: &[CVector], r0: HermitianMatrix) -> Self {
        Self { w: beams.iter().map(HermitianMatrix::outer).collect(), r0 }
    }

    /// `Σ W_k + R0`.
    pub fn rx(&self) -> HermitianMatrix {
        self.w.iter().fold(self.r0.clone(), |acc, w| acc.add(w))
    }

    pub fn power(&self) -> f64 {
        self.rx().trace()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CrbComponents {
    /// `tr((G R_x Gᴴ)⁻¹)` and `tr((G Gᴴ)⁻¹)`.
    Extended { tr_inv_grg: f64, tr_inv_gg: f64 },
    /// Fisher information entries of the point model.
    Point { f_theta_theta: f64, f_theta_alpha: [f64; 2], f_alpha_alpha: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrbReport {
    /// `+∞` when not finite.
    pub crb_value: f64,
    pub finite: bool,
    pub components: Option<CrbComponents>,
}

impl CrbReport {
    pub fn unbounded() -> Self {
        Self { crb_value: f64::INFINITY, finite: false, components: None }
    }

    fn bounded(value: f64, components: CrbComponents) -> Self {
        if value > 0.0 && value.is_finite() {
            Self { crb_value: value, finite: true, components: Some(components) }
        } else {
            Self::unbounded()
        }
    }

    pub fn value_db(&self) -> f64 {
        10.0 * self.crb_value.log10()
    }
}

pub fn sinr(
    ch: &ChannelSet,
    v: &CVector,
    tx: &TxCovariance,
    k: usize,
    receiver: ReceiverType,
    sigma_k_sq: f64,
) -> Result<f64> {
    let h = combined_channel(ch, v, k)?;
    if tx.w.len() != ch.k() {
        return Err(Error::InvalidInput(format!("{} beams for K={}", tx.w.len(), ch.k())));
    }
    let signal = tx.w[k].quad(&h);
    let mut denom = sigma_k_sq;
    for (i, w) in tx.w.iter().enumerate() {
        if i != k {
            denom += w.quad(&h);
        }
    }
    if receiver == ReceiverType::I {
        denom += tx.r0.quad(&h);
    }
    Ok(signal / denom)
}

/// `(σ²/T)·tr((G R_x Gᴴ)⁻¹)·tr((G Gᴴ)⁻¹)`.
pub fn crb_extended(g: &CMatrix, tx: &TxCovariance, sigma_r_sq: f64, t: usize) -> CrbReport {
    let grg = tx.rx().congruence(g);
    let gg = HermitianMatrix::from_raw(g * g.adjoint());
    match (trace_inverse(&grg), trace_inverse(&gg)) {
        (Ok(a), Ok(b)) => CrbReport::bounded(
            sigma_r_sq / t as f64 * a * b,
            CrbComponents::Extended { tr_inv_grg: a, tr_inv_gg: b },
        ),
        _ => CrbReport::unbounded(),
    }
}

/// Real 2N²×2N² FIM for `[Re vec(H); Im vec(H)]`.
pub fn fim_extended_full(g: &CMatrix, v: &CVector, tx: &TxCovariance, sigma_r_sq: f64, t: usize) -> DMatrix<f64> {
    let phi_g = CMatrix::from_diagonal(v) * g;
    let conj = phi_g.map(|z| z.conj());
    let rx_t = tx.rx().matrix().transpose();
    let q1 = &conj * rx_t * phi_g.transpose();
    let q2 = &conj * phi_g.transpose();
    let q = kron(&q1, &q2);
    real_embed_general(&q) * (2.0 * t as f64 / sigma_r_sq)
}

struct PointTerms {
    /// `tr(Ḃ R Ḃᴴ)`
    dd: f64,
    /// `tr(B R Ḃᴴ)`
    bd: Complex64,
    /// `tr(B R Bᴴ)`
    bb: f64,
}

fn point_terms(ch: &ChannelSet, v: &CVector, rx: &HermitianMatrix) -> PointTerms {
    let a = steering(ch.theta, ch.n(), ch.d_over_lambda);
    let da = steering_derivative(ch.theta, ch.n(), ch.d_over_lambda);
    let gtp = ch.g.transpose() * CMatrix::from_diagonal(v);
    let b = &gtp * a;
    let bd = &gtp * da;
    let bm = &b * b.transpose();
    let bdm = &bd * b.transpose() + &b * bd.transpose();
    let r = rx.matrix();
    let tr = |x: &CMatrix, y: &CMatrix| (x * r * y.adjoint()).trace();
    PointTerms { dd: tr(&bdm, &bdm).re, bd: tr(&bm, &bdm), bb: tr(&bm, &bm).re }
}

/// DoA bound from the transmit-side expression.
pub fn crb_point_tx_form(ch: &ChannelSet, v: &CVector, tx: &TxCovariance, sigma_r_sq: f64, t: usize) -> CrbReport {
    let rx = tx.rx();
    let p = point_terms(ch, v, &rx);
    let scale = rx.trace().max(0.0) * ch.g.norm_squared().powi(2) * (ch.n() * ch.n()) as f64;
    if !(p.bb > RANK_TOL * scale) {
        return CrbReport::unbounded();
    }
    let j = p.dd - p.bd.norm_sqr() / p.bb;
    let pref = 2.0 * t as f64 / sigma_r_sq;
    let fa = pref * (ch.alpha.conj() * p.bd);
    CrbReport::bounded(
        sigma_r_sq / (2.0 * t as f64 * ch.alpha.norm_sqr() * j),
        CrbComponents::Point {
            f_theta_theta: pref * ch.alpha.norm_sqr() * p.dd,
            f_theta_alpha: [fa.re, (fa * J).re],
            f_alpha_alpha: pref * p.bb,
        },
    )
}

/// Reflect-side matrices `R₁`, `R₂` (N×N) for the DoA bound.
pub fn reflect_matrices(ch: &ChannelSet, rx: &HermitianMatrix) -> (HermitianMatrix, HermitianMatrix) {
    let a = steering(ch.theta, ch.n(), ch.d_over_lambda);
    let left = CMatrix::from_diagonal(&a.map(|z| z.conj())) * ch.g.map(|z| z.conj());
    let right = ch.g.transpose() * CMatrix::from_diagonal(&a);
    let r1 = HermitianMatrix::from_raw(&left * &right);
    let r2 = HermitianMatrix::from_raw(&left * rx.conj().matrix() * &right);
    (r1, r2)
}

/// `σ²/(8T|α|²π²(d/λ)²cos²θ)`.
pub fn reflect_prefactor(ch: &ChannelSet, sigma_r_sq: f64, t: usize) -> Result<f64> {
    let cos = ch.theta.cos();
    if cos.abs() < 1e-12 {
        return Err(Error::DegenerateGeometry("target DoA is endfire to the IRS".into()));
    }
    Ok(sigma_r_sq / (8.0 * t as f64 * ch.alpha.norm_sqr() * PI * PI * ch.d_over_lambda.powi(2) * cos * cos))
}

/// Denominator of the reflect-side DoA bound as a function of `v`.
pub fn reflect_denominator(r1: &HermitianMatrix, r2: &HermitianMatrix, v: &CVector) -> Option<f64> {
    let n = v.len();
    let dv = CVector::from_fn(n, |i, _| v[i] * c(i as f64));
    let p1 = r1.quad(v);
    let p2 = r2.quad(v);
    if !(p1 > 0.0 && p2 > 0.0) {
        return None;
    }
    let q1 = r1.quad(&dv);
    let q2 = r2.quad(&dv);
    let s1 = dv.dotc(&(r1.matrix() * v));
    let s2 = dv.dotc(&(r2.matrix() * v));
    Some(p2 * (q1 - s1.norm_sqr() / p1) + p1 * (q2 - s2.norm_sqr() / p2))
}

/// DoA bound from the reflect-side expression.
pub fn crb_point_reflect_form(
    ch: &ChannelSet,
    v: &CVector,
    tx: &TxCovariance,
    sigma_r_sq: f64,
    t: usize,
) -> Result<CrbReport> {
    let pref = reflect_prefactor(ch, sigma_r_sq, t)?;
    let (r1, r2) = reflect_matrices(ch, &tx.rx());
    let scale = r1.norm() * r2.norm() * (v.len() as f64).powi(4);
    match reflect_denominator(&r1, &r2, v) {
        Some(d) if d > RANK_TOL * scale => Ok(CrbReport {
            crb_value: pref / d,
            finite: true,
            components: None,
        }),
        _ => Ok(CrbReport::unbounded()),
    }
}

/// 3×3 FIM over `(θ, Re α, Im α)`.
pub fn fim_point(ch: &ChannelSet, v: &CVector, tx: &TxCovariance, sigma_r_sq: f64, t: usize) -> Matrix3<f64> {
    let p = point_terms(ch, v, &tx.rx());
    let pref = 2.0 * t as f64 / sigma_r_sq;
    let fa = ch.alpha.conj() * p.bd * c(pref);
    let (f1, f2) = (fa.re, (fa * J).re);
    let faa = pref * p.bb;
    Matrix3::new(
        pref * ch.alpha.norm_sqr() * p.dd,
        f1,
        f2,
        f1,
        faa,
        0.0,
        f2,
        0.0,
        faa,
    )
}

fn checked_pinv(a: &CMatrix) -> Result<CMatrix> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let need = a.nrows().min(a.ncols());
    let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOL * smax).count();
    if smax <= 0.0 || rank < need {
        return Err(Error::SingularMatrix);
    }
    svd.pseudo_inverse(RANK_TOL * smax).map_err(|e| Error::Numerical(e.to_string()))
}

/// Least-squares target response from echoes, using the Kronecker structure
/// of the pseudo-inverse: `Ĥ = (BᵀG)⁺ Y (B X)⁺` with `B = Φ G`.
pub fn ls_estimate_trm(y: &CMatrix, x: &CMatrix, g: &CMatrix, v: &CVector) -> Result<CMatrix> {
    let n = g.nrows();
    let b = CMatrix::from_diagonal(v) * g;
    if y.nrows() != g.ncols() || y.ncols() != x.ncols() || x.nrows() != g.ncols() || v.len() != n {
        return Err(Error::InvalidInput("echo, waveform and channel dimensions disagree".into()));
    }
    let bt = b.transpose();
    let bx = &b * x;
    if bt.ncols() > bt.nrows() || bx.nrows() > bx.ncols() {
        return Err(Error::SingularMatrix);
    }
    let left = checked_pinv(&bt)?;
    let right = checked_pinv(&bx)?;
    Ok(left * y * right)
}
