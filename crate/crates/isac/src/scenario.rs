//! System configuration and random channel realizations.
//!
//! Geometry is two-dimensional. The BS ULA and the IRS both lie along the
//! x-axis, so the array response towards a point depends on the x component
//! of the unit direction vector, which plays the role of `sin θ`.
//!
//! Every link draws from its own ChaCha stream keyed by the trial seed, so
//! adding CUs or changing `K` leaves the other links untouched.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{c, CMatrix, CVector, J};
use crate::TargetMode;

const STREAM_BS_IRS: u64 = 1;
const STREAM_TARGET: u64 = 2;
const STREAM_ECHO: u64 = 3;
const STREAM_CU_BASE: u64 = 16;

/// Number of point scatterers composing an extended target.
pub const EXTENDED_SCATTERERS: usize = 3;
/// Half-width of the angular spread of the extended scatterers, radians.
pub const EXTENDED_SPREAD: f64 = 0.3;

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathLoss {
    /// Loss at the 1 m reference distance, linear.
    pub k0: f64,
    pub alpha_bi: f64,
    pub alpha_iu: f64,
    pub alpha_bu: f64,
}

impl PathLoss {
    pub fn gain(&self, distance: f64, exponent: f64) -> f64 {
        self.k0 * distance.powf(-exponent)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    /// Transmit power budget, W.
    pub p0: f64,
    /// Radar receiver noise power, W.
    pub sigma_r_sq: f64,
    /// Per-CU noise power, W.
    pub sigma_k_sq: Vec<f64>,
    /// Per-CU SINR thresholds, linear.
    pub gamma: Vec<f64>,
    /// IRS element spacing over wavelength.
    pub d_over_lambda: f64,
    /// Carrier wavelength, m. Sets the propagation phase of LoS components.
    pub wavelength: f64,
    pub bs: [f64; 2],
    pub irs: [f64; 2],
    pub target: [f64; 2],
    /// Opposite corners of the CU placement rectangle.
    pub cu_region: [[f64; 2]; 2],
    pub pathloss: PathLoss,
    /// Rician factor; `f64::INFINITY` gives pure LoS.
    pub rician_factor: f64,
    pub shadow_std_db: f64,
    pub rcs: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let k = 4;
        Self {
            m: 8,
            n: 8,
            k,
            t: 256,
            p0: dbm_to_watts(30.0),
            sigma_r_sq: dbm_to_watts(-110.0),
            sigma_k_sq: vec![dbm_to_watts(-80.0); k],
            gamma: vec![db_to_linear(10.0); k],
            d_over_lambda: 0.5,
            wavelength: 0.1,
            bs: [0.0, 0.0],
            irs: [4.0, 5.0],
            target: [4.0, 1.0],
            cu_region: [[40.0, 0.0], [50.0, -10.0]],
            pathloss: PathLoss { k0: db_to_linear(-30.0), alpha_bi: 2.2, alpha_iu: 2.2, alpha_bu: 3.0 },
            rician_factor: 0.5,
            shadow_std_db: 10.0,
            rcs: 1.0,
        }
    }
}

impl SystemConfig {
    /// Sets `K` users sharing the same noise power and SINR threshold.
    pub fn with_users(mut self, k: usize, gamma: f64) -> Self {
        let sigma = self.sigma_k_sq.first().copied().unwrap_or(dbm_to_watts(-80.0));
        self.k = k;
        self.sigma_k_sq = vec![sigma; k];
        self.gamma = vec![gamma; k];
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = vec![gamma; self.k];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m < 2 || self.n < 2 {
            return bad(format!("need M > 1 and N > 1, got M={} N={}", self.m, self.n));
        }
        if self.k < 1 || self.t < 1 {
            return bad(format!("need K >= 1 and T >= 1, got K={} T={}", self.k, self.t));
        }
        if self.sigma_k_sq.len() != self.k || self.gamma.len() != self.k {
            return bad(format!(
                "per-CU lists have lengths {} and {}, expected K={}",
                self.sigma_k_sq.len(),
                self.gamma.len(),
                self.k
            ));
        }
        let positive = [self.p0, self.sigma_r_sq, self.d_over_lambda, self.wavelength, self.pathloss.k0];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("P0, sigma_R^2, d/lambda, wavelength and K0 must be finite and positive".into());
        }
        if self.sigma_k_sq.iter().chain(&self.gamma).any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("CU noise powers and SINR thresholds must be finite and positive".into());
        }
        if !(self.rician_factor >= 0.0) || !(self.shadow_std_db >= 0.0) || !(self.rcs > 0.0) {
            return bad("Rician factor and shadowing must be nonnegative, RCS positive".into());
        }
        let coords = [self.bs, self.irs, self.target, self.cu_region[0], self.cu_region[1]];
        if coords.iter().flatten().any(|x| !x.is_finite()) {
            return bad("non-finite coordinate".into());
        }
        if distance(self.bs, self.irs) <= 0.0 || distance(self.irs, self.target) <= 0.0 {
            return bad("BS, IRS and target must be at distinct positions".into());
        }
        Ok(())
    }
}

/// One channel realization.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// BS to IRS, N×M.
    pub g: CMatrix,
    /// BS to CU k, length M.
    pub h_d: Vec<CVector>,
    /// IRS to CU k, length N.
    pub h_r: Vec<CVector>,
    /// Target DoA at the IRS, radians.
    pub theta: f64,
    /// Round-trip coefficient of the point target.
    pub alpha: Complex64,
    /// Extended target response, complex symmetric N×N.
    pub h_trm: Option<CMatrix>,
    pub d_over_lambda: f64,
    pub cu_positions: Vec<[f64; 2]>,
}

impl ChannelSet {
    pub fn m(&self) -> usize {
        self.g.ncols()
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn k(&self) -> usize {
        self.h_d.len()
    }

    /// `α a(θ) aᵀ(θ)`.
    pub fn point_trm(&self) -> CMatrix {
        let a = steering(self.theta, self.n(), self.d_over_lambda);
        &a * a.transpose() * self.alpha
    }

    /// FNV-1a over the bit patterns of every channel entry.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        let mut eat_c = |z: &Complex64| {
            eat(z.re);
            eat(z.im);
        };
        self.g.iter().for_each(&mut eat_c);
        self.h_d.iter().flatten().for_each(&mut eat_c);
        self.h_r.iter().flatten().for_each(&mut eat_c);
        eat_c(&self.alpha);
        if let Some(h) = &self.h_trm {
            h.iter().for_each(&mut eat_c);
        }
        eat(self.theta);
        h
    }
}

/// ULA response, element n = `exp(j·2π·n·(d/λ)·sin θ)`.
pub fn steering(theta: f64, n: usize, d_over_lambda: f64) -> CVector {
    response(theta.sin(), n, d_over_lambda)
}

/// `∂ steering / ∂θ`.
pub fn steering_derivative(theta: f64, n: usize, d_over_lambda: f64) -> CVector {
    let a = steering(theta, n, d_over_lambda);
    let k = TAU * d_over_lambda * theta.cos();
    CVector::from_fn(n, |i, _| J * c(k * i as f64) * a[i])
}

/// ULA response towards direction cosine `u`.
fn response(u: f64, n: usize, d_over_lambda: f64) -> CVector {
    CVector::from_fn(n, |i, _| Complex64::from_polar(1.0, TAU * i as f64 * d_over_lambda * u))
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

/// x component of the unit vector from `a` to `b`.
fn direction_cosine(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]) / distance(a, b)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn uniform_phase(rng: &mut ChaCha8Rng) -> Complex64 {
    // (0, 2π]
    Complex64::from_polar(1.0, TAU * (1.0 - rng.random::<f64>()))
}

fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    }
}

/// `sqrt(L)·(w_los·LoS + w_nlos·NLoS)` with the NLoS part drawn from `rng`.
fn rician(los: CMatrix, gain: f64, kappa: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let (wl, wn) = rician_weights(kappa);
    let (r, cols) = los.shape();
    let nlos = CMatrix::from_fn(r, cols, |_, _| cn(rng));
    (los * c(wl) + nlos * c(wn)) * c(gain.sqrt())
}

fn as_column(x: &CVector) -> CMatrix {
    CMatrix::from_column_slice(x.len(), 1, x.as_slice())
}

fn propagation_phase(d: f64, wavelength: f64) -> Complex64 {
    Complex64::from_polar(1.0, -TAU * d / wavelength)
}

pub fn generate_channels(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    let (m, n) = (cfg.m, cfg.n);
    let pl = &cfg.pathloss;
    let kappa = cfg.rician_factor;

    let d_bi = distance(cfg.bs, cfg.irs);
    let a_irs = response(direction_cosine(cfg.irs, cfg.bs), n, cfg.d_over_lambda);
    let a_bs = response(direction_cosine(cfg.bs, cfg.irs), m, 0.5);
    let g_los = &a_irs * a_bs.transpose() * propagation_phase(d_bi, cfg.wavelength);
    let g = rician(g_los, pl.gain(d_bi, pl.alpha_bi), kappa, &mut stream(seed, STREAM_BS_IRS));

    let mut h_d = Vec::with_capacity(cfg.k);
    let mut h_r = Vec::with_capacity(cfg.k);
    let mut cu_positions = Vec::with_capacity(cfg.k);
    let [c0, c1] = cfg.cu_region;
    for k in 0..cfg.k {
        let base = STREAM_CU_BASE + 4 * k as u64;
        let mut pos_rng = stream(seed, base);
        let pos = [
            c0[0] + (c1[0] - c0[0]) * pos_rng.random::<f64>(),
            c0[1] + (c1[1] - c0[1]) * pos_rng.random::<f64>(),
        ];
        cu_positions.push(pos);

        let d_bu = distance(cfg.bs, pos);
        let shadow_db: f64 = cfg.shadow_std_db * stream(seed, base + 3).sample::<f64, _>(StandardNormal);
        let los = response(direction_cosine(cfg.bs, pos), m, 0.5).map(|z| z.conj())
            * propagation_phase(d_bu, cfg.wavelength).conj();
        let hd = rician(as_column(&los), pl.gain(d_bu, pl.alpha_bu), kappa, &mut stream(seed, base + 1));
        h_d.push(CVector::from_column_slice(hd.as_slice()) * c(10f64.powf(shadow_db / 20.0)));

        let d_iu = distance(cfg.irs, pos);
        let los = response(direction_cosine(cfg.irs, pos), n, cfg.d_over_lambda).map(|z| z.conj())
            * propagation_phase(d_iu, cfg.wavelength).conj();
        let hr = rician(as_column(&los), pl.gain(d_iu, pl.alpha_iu), kappa, &mut stream(seed, base + 2));
        h_r.push(CVector::from_column_slice(hr.as_slice()));
    }

    let d_it = distance(cfg.irs, cfg.target);
    let theta = direction_cosine(cfg.irs, cfg.target).clamp(-1.0, 1.0).asin();
    let l_it = pl.gain(d_it, pl.alpha_bi);
    let mut trng = stream(seed, STREAM_TARGET);
    let alpha = uniform_phase(&mut trng) * (cfg.rcs * l_it * l_it).sqrt();
    let mut h_trm = CMatrix::zeros(n, n);
    let amp = (cfg.rcs / EXTENDED_SCATTERERS as f64 * l_it * l_it).sqrt();
    for _ in 0..EXTENDED_SCATTERERS {
        let phi = theta + EXTENDED_SPREAD * (2.0 * trng.random::<f64>() - 1.0);
        let a = steering(phi, n, cfg.d_over_lambda);
        h_trm += &a * a.transpose() * (uniform_phase(&mut trng) * amp);
    }

    Ok(ChannelSet {
        g,
        h_d,
        h_r,
        theta,
        alpha,
        h_trm: Some(h_trm),
        d_over_lambda: cfg.d_over_lambda,
        cu_positions,
    })
}

/// `h_d,k + Gᴴ diag(v)ᴴ h_r,k`.
pub fn combined_channel(ch: &ChannelSet, v: &CVector, k: usize) -> Result<CVector> {
    if k >= ch.k() {
        return Err(Error::InvalidInput(format!("CU index {k} out of range for K={}", ch.k())));
    }
    if v.len() != ch.n() {
        return Err(Error::InvalidInput(format!("reflection vector has length {}, expected {}", v.len(), ch.n())));
    }
    let phr = v.zip_map(&ch.h_r[k], |vn, h| vn.conj() * h);
    Ok(&ch.h_d[k] + ch.g.adjoint() * phr)
}

/// Target response seen through the IRS in the given mode.
pub fn trm(ch: &ChannelSet, mode: TargetMode) -> Result<CMatrix> {
    match mode {
        TargetMode::Point => Ok(ch.point_trm()),
        TargetMode::Extended => ch
            .h_trm
            .clone()
            .ok_or_else(|| Error::InvalidInput("channel set has no extended target response".into())),
    }
}

/// `Y = Gᵀ Φᵀ H Φ G X + N` with CN(0, σ²) noise entries.
pub fn simulate_echo(
    ch: &ChannelSet,
    v: &CVector,
    x: &CMatrix,
    sigma_r_sq: f64,
    seed: u64,
    mode: TargetMode,
) -> Result<CMatrix> {
    if x.nrows() != ch.m() || v.len() != ch.n() {
        return Err(Error::InvalidInput(format!(
            "X has {} rows and v length {}, expected {} and {}",
            x.nrows(),
            v.len(),
            ch.m(),
            ch.n()
        )));
    }
    let h = trm(ch, mode)?;
    let phi_g = CMatrix::from_diagonal(v) * &ch.g;
    let mut y = phi_g.transpose() * h * &phi_g * x;
    if sigma_r_sq > 0.0 {
        let mut rng = stream(seed, STREAM_ECHO);
        let s = c(sigma_r_sq.sqrt());
        for z in y.iter_mut() {
            *z += cn(&mut rng) * s;
        }
    }
    Ok(y)
}

/// Reflection vector with i.i.d. uniform phases.
pub fn random_reflection(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| uniform_phase(rng))
}
