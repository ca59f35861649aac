//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Always exits successfully so the report can run inside `cargo test`;
//! set `ACCEPTANCE_STRICT=1` to exit with status 1 when any criterion fails.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use conic::{extract_dual, ConicProblem, Functional, SolverOptions, Status};
use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use isac::driver::{run_alternating, run_benchmark_separate, run_benchmark_tx_only, RunTrace};
use isac::harness::{run_experiment, to_csv, trial_seed, ExperimentSpec, Scheme};
use isac::metrics::{
    crb_extended, crb_point_reflect_form, crb_point_tx_form, fim_extended_full, ls_estimate_trm, TxCovariance,
};
use isac::numerics::{psd_sqrt, CMatrix, CVector, HermitianMatrix};
use isac::rbf::{build_reflect_data, solve_reflect_point_sca};
use isac::scenario::{
    db_to_linear, generate_channels, random_reflection, simulate_echo, steering, steering_derivative, ChannelSet,
    SystemConfig,
};
use isac::txbf::{channels, extract_rank_one, min_sinr_ratio, restructure_r0_zero, solve_tx};
use isac::{Error, ReceiverType, TargetMode};

const RECEIVERS: [ReceiverType; 2] = [ReceiverType::I, ReceiverType::II];
const TARGETS: [TargetMode; 2] = [TargetMode::Extended, TargetMode::Point];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_cmatrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| cn(rng))
}

fn herm(m: CMatrix) -> HermitianMatrix {
    HermitianMatrix::new(m).expect("finite square matrix")
}

fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let a = random_cmatrix(n, rank, rng);
    herm(&a * a.adjoint())
}

fn random_tx(m: usize, k: usize, rng: &mut ChaCha8Rng) -> TxCovariance {
    let w = (0..k).map(|_| random_psd(m, 1, rng)).collect();
    TxCovariance::new(w, random_psd(m, m, rng))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn reference(k: usize, gamma_db: f64) -> SystemConfig {
    SystemConfig::default().with_users(k, db_to_linear(gamma_db))
}

/// Waveform with `X Xᴴ = T·R_x` for `T = M`.
fn waveform_for(rx: &HermitianMatrix) -> CMatrix {
    let m = rx.dim();
    psd_sqrt(rx).unwrap().into_matrix() * Complex64::new((m as f64).sqrt(), 0.0)
}

/// Real FIM of `[Re h; Im h]` for the linear model `u = D h`.
fn real_fim(d: &CMatrix, sigma_sq: f64) -> DMatrix<f64> {
    let a = d.adjoint() * d;
    let p = a.nrows();
    DMatrix::from_fn(2 * p, 2 * p, |i, j| {
        let z = a[(i % p, j % p)];
        let v = match (i < p, j < p) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        };
        2.0 / sigma_sq * v
    })
}

/// FIM of `vec(H)` from `vec(GᵀΦ H ΦG X) = (XᵀGᵀΦ ⊗ GᵀΦ) vec(H)`.
fn direct_extended_fim(g: &CMatrix, v: &CVector, x: &CMatrix, sigma_sq: f64) -> DMatrix<f64> {
    let a = g.transpose() * CMatrix::from_diagonal(v);
    let left = x.transpose() * &a;
    real_fim(&left.kronecker(&a), sigma_sq)
}

/// FIM over `(θ, Re α, Im α)` from `u = α vec(b bᵀ X)` with `b = GᵀΦ a(θ)`.
fn direct_point_fim(ch: &ChannelSet, v: &CVector, x: &CMatrix, sigma_sq: f64) -> Matrix3<f64> {
    let a = ch.g.transpose() * CMatrix::from_diagonal(v);
    let b = &a * steering(ch.theta, ch.n(), ch.d_over_lambda);
    let bd = &a * steering_derivative(ch.theta, ch.n(), ch.d_over_lambda);
    let flat = |m: CMatrix| CVector::from_column_slice(m.as_slice());
    let bb = &b * b.transpose();
    let du = [
        flat((&bd * b.transpose() + &b * bd.transpose()) * x * ch.alpha),
        flat(&bb * x),
        flat(&bb * x * Complex64::new(0.0, 1.0)),
    ];
    Matrix3::from_fn(|i, j| 2.0 / sigma_sq * du[i].dotc(&du[j]).re)
}

// ---------------------------------------------------------------- 1 and 2

struct TightnessStats {
    instances: HashMap<&'static str, usize>,
    worst_gap: f64,
    worst_sinr: f64,
    worst_power: f64,
    errors: Vec<String>,
    extraction_psd: f64,
    extraction_power: f64,
    extraction_gain: f64,
    extraction_fail: usize,
    extractions: usize,
}

fn formulation_name(mode: TargetMode, receiver: ReceiverType) -> &'static str {
    match (mode, receiver) {
        (TargetMode::Extended, ReceiverType::I) => "extended/I",
        (TargetMode::Extended, ReceiverType::II) => "extended/II",
        (TargetMode::Point, ReceiverType::I) => "point/I",
        (TargetMode::Point, ReceiverType::II) => "point/II",
    }
}

fn tightness_suite() -> TightnessStats {
    let mut st = TightnessStats {
        instances: HashMap::new(),
        worst_gap: 0.0,
        worst_sinr: 0.0,
        worst_power: 0.0,
        errors: Vec::new(),
        extraction_psd: 0.0,
        extraction_power: 0.0,
        extraction_gain: 0.0,
        extraction_fail: 0,
        extractions: 0,
    };
    const PER_SIZE: usize = 7;
    for mode in TARGETS {
        for receiver in RECEIVERS {
            let name = formulation_name(mode, receiver);
            for mn in [2usize, 4, 8] {
                for k in [1usize, 2, 4] {
                    let mut found = 0;
                    for attempt in 0..200u64 {
                        if found == PER_SIZE {
                            break;
                        }
                        let seed = 10_000 * mn as u64 + 1000 * k as u64 + attempt;
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        let gamma_db = 10.0 * rng.random::<f64>();
                        let cfg = SystemConfig { m: mn, n: mn, ..SystemConfig::default() }
                            .with_users(k, db_to_linear(gamma_db));
                        let Ok(ch) = generate_channels(&cfg, seed) else { continue };
                        let v = random_reflection(mn, &mut rng);
                        let sol = match solve_tx(&ch, &v, &cfg, mode, receiver) {
                            Ok(s) => s,
                            Err(Error::Infeasible(_)) => continue,
                            Err(e) => {
                                st.errors.push(format!("{name} M=N={mn} K={k} seed {seed}: {e}"));
                                found += 1;
                                continue;
                            }
                        };
                        found += 1;
                        *st.instances.entry(name).or_default() += 1;
                        st.worst_gap = st.worst_gap.max(rel(sol.objective, sol.sdr_objective));
                        let ratio = min_sinr_ratio(&ch, &v, &sol.covariance(), &cfg, receiver).unwrap_or(0.0);
                        st.worst_sinr = st.worst_sinr.max(1.0 - ratio);
                        st.worst_power = st.worst_power.max(sol.power() / cfg.p0 - 1.0);
                        check_extraction(&mut st, &ch, &v, &sol, receiver);
                    }
                }
            }
        }
    }
    st
}

fn check_extraction(
    st: &mut TightnessStats,
    ch: &ChannelSet,
    v: &CVector,
    sol: &isac::txbf::TxSolution,
    receiver: ReceiverType,
) {
    st.extractions += 1;
    let (Some(relaxed), Ok(h)) = (&sol.relaxed, channels(ch, v)) else {
        st.extraction_fail += 1;
        return;
    };
    let base = match receiver {
        ReceiverType::I => restructure_r0_zero(relaxed, &h),
        ReceiverType::II => relaxed.clone(),
    };
    let Ok(ex) = extract_rank_one(&base, &h) else {
        st.extraction_fail += 1;
        return;
    };
    if !ex.degenerate.is_empty() {
        st.extraction_fail += 1;
    }
    let scale = base.rx().trace();
    for (k, (wk, hk)) in base.w.iter().zip(&h).enumerate() {
        let diff = wk.sub(&HermitianMatrix::outer(&ex.w[k]));
        st.extraction_psd = st.extraction_psd.max(-diff.min_eigenvalue() / scale);
        let g_relaxed = wk.quad(hk);
        let g_beam = ex.w[k].dotc(hk).norm_sqr();
        st.extraction_gain = st.extraction_gain.max(rel(g_beam, g_relaxed));
    }
    let total: f64 = ex.w.iter().map(|w| w.norm_squared()).sum::<f64>() + ex.r0.trace();
    st.extraction_power = st.extraction_power.max(rel(total, scale));
    // The extraction must also be what the solver returned.
    let same = ex.w.iter().zip(&sol.w).all(|(a, b)| (a - b).norm() <= 1e-12 * (1.0 + b.norm()));
    if !same {
        st.extraction_fail += 1;
    }
}

fn criterion_1(st: &TightnessStats) -> Outcome {
    let min_count = ["extended/I", "extended/II", "point/I", "point/II"]
        .iter()
        .map(|n| st.instances.get(n).copied().unwrap_or(0))
        .min()
        .unwrap();
    let pass = min_count >= 50
        && st.errors.is_empty()
        && st.worst_gap <= 1e-6
        && st.worst_sinr <= 1e-6
        && st.worst_power <= 1e-6;
    let mut detail = format!(
        "{min_count}+ instances per formulation, worst objective gap {:.1e}, SINR shortfall {:.1e}, power excess {:.1e}",
        st.worst_gap, st.worst_sinr, st.worst_power.max(0.0)
    );
    if let Some(e) = st.errors.first() {
        detail += &format!(", {} solver errors (first: {e})", st.errors.len());
    }
    Outcome::new(pass, detail)
}

fn criterion_2(st: &TightnessStats) -> Outcome {
    let pass = st.extraction_fail == 0
        && st.extraction_psd <= 1e-9
        && st.extraction_power <= 1e-10
        && st.extraction_gain <= 1e-10;
    Outcome::new(
        pass,
        format!(
            "{} extractions, {} failed, worst PSD deficit {:.1e}, power identity {:.1e}, CU gain {:.1e}",
            st.extractions, st.extraction_fail, st.extraction_psd, st.extraction_power, st.extraction_gain
        ),
    )
}

// ---------------------------------------------------------------- 3 to 6

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for inst in 0..12 {
        let n = 2 + inst % 3;
        let m = n + inst % 2;
        let g = random_cmatrix(n, m, &mut rng);
        let tx = random_tx(m, 1 + inst % 2, &mut rng);
        let x = waveform_for(&tx.rx());
        let vals: Vec<f64> = (0..20)
            .map(|_| {
                let v = random_reflection(n, &mut rng);
                direct_extended_fim(&g, &v, &x, 0.3).try_inverse().map_or(f64::NAN, |f| f.trace())
            })
            .collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(if lo.is_finite() { (hi - lo) / lo } else { f64::INFINITY });
        let closed = crb_extended(&g, &tx, 0.3, m).crb_value;
        worst = worst.max(rel(closed, lo));
    }
    Outcome::new(worst <= 1e-8, format!("worst relative spread over 20 reflections {worst:.1e} (12 channel/covariance pairs)"))
}

fn random_point_instance(seed: u64) -> (ChannelSet, CVector, TxCovariance, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 + (seed % 5) as usize;
    let m = 2 + (seed % 4) as usize;
    let cfg = SystemConfig { m, n, ..SystemConfig::default() }.with_users(1, 1.0);
    let mut ch = generate_channels(&cfg, seed).unwrap();
    ch.g = random_cmatrix(n, m, &mut rng);
    ch.theta = 1.4 * (rng.random::<f64>() - 0.5);
    ch.alpha = cn(&mut rng);
    let v = random_reflection(n, &mut rng);
    (ch, v, random_tx(m, 1, &mut rng), m)
}

fn criterion_4() -> Outcome {
    let mut ext: f64 = 0.0;
    let mut assembled: f64 = 0.0;
    let mut mut_rng = ChaCha8Rng::seed_from_u64(4);
    let rng = &mut mut_rng;
    for inst in 0..100 {
        let n = 1 + inst % 4;
        let m = n + inst % 3;
        let g = random_cmatrix(n, m, rng);
        let v = random_reflection(n, rng);
        let tx = random_tx(m, 1 + inst % 3, rng);
        let sigma = 0.1 + rng.random::<f64>();
        let direct = direct_extended_fim(&g, &v, &waveform_for(&tx.rx()), sigma);
        let want = direct.clone().try_inverse().map_or(f64::NAN, |f| f.trace());
        ext = ext.max(rel(crb_extended(&g, &tx, sigma, m).crb_value, want));
        let fim = fim_extended_full(&g, &v, &tx, sigma, m);
        assembled = assembled.max((&fim - &direct).norm() / direct.norm());
    }
    let mut point: f64 = 0.0;
    let mut forms: f64 = 0.0;
    for seed in 0..100 {
        let (ch, v, tx, m) = random_point_instance(seed);
        let sigma = 0.5;
        let f = direct_point_fim(&ch, &v, &waveform_for(&tx.rx()), sigma);
        let want = f.try_inverse().map_or(f64::NAN, |inv| inv[(0, 0)]);
        let tx_form = crb_point_tx_form(&ch, &v, &tx, sigma, m).crb_value;
        point = point.max(rel(tx_form, want));
        let reflect = crb_point_reflect_form(&ch, &v, &tx, sigma, m).map_or(f64::NAN, |r| r.crb_value);
        forms = forms.max(rel(reflect, tx_form));
    }
    let pass = ext <= 1e-6 && assembled <= 1e-6 && point <= 1e-8 && forms <= 1e-8;
    Outcome::new(
        pass,
        format!(
            "extended bound vs direct FIM {ext:.1e} (assembled FIM {assembled:.1e}), point bound vs FIM inverse {point:.1e}, transmit vs reflect form {forms:.1e}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let (m, n, t) = (4, 4, 64);
    let cfg = SystemConfig { m, n, t, ..SystemConfig::default() }.with_users(1, 1.0);
    let ch = generate_channels(&cfg, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = random_reflection(n, &mut rng);
    let x = random_cmatrix(m, t, &mut rng);
    let rx = herm(&x * x.adjoint() / Complex64::new(t as f64, 0.0));
    let sigma = 1e-2 * (ch.g.norm_squared() / (n * m) as f64).powi(2);
    let crb = crb_extended(&ch.g, &TxCovariance::new(vec![], rx), sigma, t).crb_value;
    let h = ch.h_trm.clone().unwrap();
    let draws = 200;
    let mse: f64 = (0..draws)
        .map(|s| {
            let y = simulate_echo(&ch, &v, &x, sigma, 50_000 + s, TargetMode::Extended).unwrap();
            (ls_estimate_trm(&y, &x, &ch.g, &v).unwrap() - &h).norm_squared()
        })
        .sum::<f64>()
        / draws as f64;
    let ratio = mse / crb;
    Outcome::new((0.95..=1.05).contains(&ratio), format!("MSE/CRB = {ratio:.4} over {draws} noise draws"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let h = 1e-6;
    for _ in 0..100 {
        let theta = PI * (rng.random::<f64>() - 0.5) * 0.98;
        let n = 2 + (rng.random::<u64>() % 15) as usize;
        let d = 0.25 + 0.5 * rng.random::<f64>();
        let fd = (steering(theta + h, n, d) - steering(theta - h, n, d)) / Complex64::new(2.0 * h, 0.0);
        let an = steering_derivative(theta, n, d);
        worst = worst.max((&fd - &an).norm() / an.norm().max(f64::MIN_POSITIVE));
    }
    Outcome::new(worst <= 1e-5, format!("worst relative error {worst:.1e} over 100 angles"))
}

// ---------------------------------------------------------------- 7 to 10

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct RunKey {
    k: usize,
    trial: usize,
    gamma_mdb: i64,
    scheme: Scheme,
    receiver: ReceiverType,
    target: TargetMode,
}

/// Memoized scheme runs on the reference scenario.
struct Runs {
    cache: HashMap<RunKey, Option<f64>>,
    channels: HashMap<(usize, usize), ChannelSet>,
    traces: Vec<RunTrace>,
    errors: Vec<String>,
}

const MASTER_SEED: u64 = 2024;

impl Runs {
    fn new() -> Self {
        Self { cache: HashMap::new(), channels: HashMap::new(), traces: Vec::new(), errors: Vec::new() }
    }

    fn crb(
        &mut self,
        k: usize,
        trial: usize,
        gamma_db: f64,
        scheme: Scheme,
        receiver: ReceiverType,
        target: TargetMode,
    ) -> Option<f64> {
        let key = RunKey { k, trial, gamma_mdb: (gamma_db * 1000.0).round() as i64, scheme, receiver, target };
        if let Some(v) = self.cache.get(&key) {
            return *v;
        }
        let seed = trial_seed(MASTER_SEED, trial);
        let cfg = reference(k, gamma_db);
        let ch = self.channels.entry((k, trial)).or_insert_with(|| generate_channels(&cfg, seed).unwrap()).clone();
        let out = match scheme {
            Scheme::Proposed => run_alternating(&ch, &cfg, target, receiver, seed),
            Scheme::TxOnly => run_benchmark_tx_only(&ch, &cfg, target, receiver, seed),
            Scheme::Separate => run_benchmark_separate(&ch, &cfg, target, receiver, seed),
        };
        let val = match out {
            Ok((sol, trace)) => {
                self.traces.push(trace);
                Some(sol.crb).filter(|c| c.is_finite())
            }
            Err(Error::Infeasible(_)) => None,
            Err(e) => {
                self.errors.push(format!("K={k} trial {trial} {gamma_db} dB {scheme}/{receiver}/{target}: {e}"));
                None
            }
        };
        self.cache.insert(key, val);
        val
    }
}

fn criterion_7(runs: &mut Runs) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut missing = 0;
    for target in TARGETS {
        for gamma_db in [0.0, 10.0, 20.0] {
            for trial in 0..10 {
                let a = runs.crb(1, trial, gamma_db, Scheme::Proposed, ReceiverType::I, target);
                let b = runs.crb(1, trial, gamma_db, Scheme::Proposed, ReceiverType::II, target);
                match (a, b) {
                    (Some(a), Some(b)) => {
                        compared += 1;
                        worst = worst.max((a - b).abs() / a.min(b));
                    }
                    (None, None) => {}
                    _ => missing += 1,
                }
            }
        }
    }
    Outcome::new(
        worst <= 1e-3 && missing == 0 && compared > 0,
        format!("{compared} single-user pairs, worst relative receiver gap {worst:.1e}, {missing} one-sided failures"),
    )
}

fn criterion_8(runs: &mut Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for target in TARGETS {
        let mut means = Vec::new();
        let mut strict = 0;
        let mut pairs_mid = 0;
        for gamma_db in [5.0, 10.0, 15.0] {
            let mut sums = (0.0, 0.0, 0usize);
            for trial in 0..10 {
                let a = runs.crb(4, trial, gamma_db, Scheme::Proposed, ReceiverType::I, target);
                let b = runs.crb(4, trial, gamma_db, Scheme::Proposed, ReceiverType::II, target);
                if let (Some(a), Some(b)) = (a, b) {
                    sums = (sums.0 + a, sums.1 + b, sums.2 + 1);
                    if gamma_db == 10.0 {
                        pairs_mid += 1;
                        if b <= 0.99 * a {
                            strict += 1;
                        }
                    }
                }
            }
            let ok = sums.2 > 0 && sums.1 <= sums.0;
            pass &= ok;
            means.push(format!("{gamma_db} dB II/I {:.3}", sums.1 / sums.0));
        }
        pass &= strict >= 7;
        parts.push(format!("{target}: {}, {strict}/{pairs_mid} pairs ≥1% lower at 10 dB", means.join(", ")));
    }
    Outcome::new(pass, parts.join("; "))
}

fn criterion_9(runs: &mut Runs) -> Outcome {
    let mut violations = Vec::new();
    let mut compared = 0;
    let mut tx_infeasible = 0;
    for target in TARGETS {
        for receiver in RECEIVERS {
            for gamma_db in [5.0, 10.0, 15.0, 30.0] {
                for trial in 0..10 {
                    let p = runs.crb(4, trial, gamma_db, Scheme::Proposed, receiver, target);
                    let t = runs.crb(4, trial, gamma_db, Scheme::TxOnly, receiver, target);
                    let s = runs.crb(4, trial, gamma_db, Scheme::Separate, receiver, target);
                    if t.is_none() && gamma_db == 30.0 {
                        tx_infeasible += 1;
                    }
                    let Some(p) = p else { continue };
                    for (name, other) in [("txonly", t), ("separate", s)] {
                        if let Some(o) = other {
                            compared += 1;
                            if p > o + 1e-6 * o {
                                violations.push(format!(
                                    "{target}/{receiver} {gamma_db} dB trial {trial}: proposed {p:.4e} > {name} {o:.4e}"
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    let mut detail = format!(
        "{compared} paired comparisons, {} violations, transmit-only infeasible on {tx_infeasible} runs at 30 dB",
        violations.len()
    );
    for v in violations.iter().take(5) {
        detail += &format!("\n    {v}");
    }
    Outcome::new(violations.is_empty() && tx_infeasible >= 1, detail)
}

fn criterion_10(runs: &Runs) -> Outcome {
    let bad = runs.traces.iter().filter(|t| !t.is_nonincreasing(1e-6)).count();
    let mut sca_runs = 0;
    let mut sca_bad = 0;
    for seed in 0..16u64 {
        let (mn, k) = if seed < 12 { (4, 2) } else { (8, 4) };
        let cfg = SystemConfig { m: mn, n: mn, ..SystemConfig::default() }.with_users(k, db_to_linear(5.0));
        let Ok(ch) = generate_channels(&cfg, 700 + seed) else { continue };
        let v = random_reflection(mn, &mut ChaCha8Rng::seed_from_u64(seed));
        let receiver = RECEIVERS[seed as usize % 2];
        let Ok(tx) = solve_tx(&ch, &v, &cfg, TargetMode::Point, receiver) else { continue };
        let data = build_reflect_data(&ch, &tx.covariance(), &cfg, receiver, TargetMode::Point);
        let out = solve_reflect_point_sca(&data, &v, seed);
        sca_runs += 1;
        if out.surrogate_trace.windows(2).any(|w| w[1] < w[0] - 1e-8 * w[0].abs()) {
            sca_bad += 1;
        }
    }
    Outcome::new(
        bad == 0 && sca_bad == 0 && sca_runs > 0,
        format!(
            "{bad} of {} outer traces increase, {sca_bad} of {sca_runs} inner surrogate traces decrease",
            runs.traces.len()
        ),
    )
}

// ---------------------------------------------------------------- 11

struct Planted {
    problem: ConicProblem,
    optimum: f64,
    a: Vec<DMatrix<f64>>,
    c: DMatrix<f64>,
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    (&m + m.transpose()) * 0.5
}

/// `X★`, `S★` with complementary ranges; `b = A(X★)`, `C = Σ y★ᵢAᵢ + S★`.
fn planted(n: usize, seed: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5).qr().q();
    let rank = 1 + (rng.random::<u64>() as usize) % n;
    let xd = DVector::from_fn(n, |i, _| if i < rank { 0.5 + rng.random::<f64>() } else { 0.0 });
    let sd = DVector::from_fn(n, |i, _| if i < rank { 0.0 } else { 0.5 + rng.random::<f64>() });
    let x_star = &q * DMatrix::from_diagonal(&xd) * q.transpose();
    let s_star = &q * DMatrix::from_diagonal(&sd) * q.transpose();
    let m = n + (rng.random::<u64>() as usize) % (n * (n + 1) / 2 - n + 1);
    let mut a = vec![DMatrix::identity(n, n)];
    a.extend((1..m).map(|_| random_sym(n, &mut rng)));
    let y: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut c = s_star;
    for (ai, yi) in a.iter().zip(&y) {
        c += ai * *yi;
    }
    let mut p = ConicProblem::new();
    let x = p.psd(n);
    p.minimize(Functional::new().dense(x, c.clone()));
    let mut optimum = 0.0;
    for (ai, yi) in a.iter().zip(&y) {
        let bi = ai.dot(&x_star);
        optimum += bi * yi;
        p.add_eq(Functional::new().dense(x, ai.clone()), bi);
    }
    Planted { problem: p, optimum, a, c }
}

fn criterion_11() -> Outcome {
    let opts = SolverOptions::default();
    let mut worst_obj: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    let mut failures = 0;
    let sizes = [2usize, 3, 5, 8, 12, 16];
    for &n in &sizes {
        for inst in 0..20 {
            let pl = planted(n, 77_000 + 100 * n as u64 + inst);
            let Ok(sol) = conic::solve(&pl.problem, &opts) else {
                failures += 1;
                continue;
            };
            let Ok(d) = extract_dual(&sol) else {
                failures += 1;
                continue;
            };
            worst_obj = worst_obj.max((sol.objective - pl.optimum).abs() / (1.0 + pl.optimum.abs()));
            let s = d.slack[0].matrix().unwrap();
            let mut resid = pl.c.clone() - s;
            for (ai, yi) in pl.a.iter().zip(&d.eq) {
                resid -= ai * *yi;
            }
            let x = sol.blocks[0].matrix().unwrap();
            let cscale = 1.0 + pl.c.norm();
            let kkt = (resid.norm() / cscale).max(x.dot(s).abs() / (cscale * (1.0 + x.norm())));
            worst_kkt = worst_kkt.max(kkt);
            if sol.status != Status::Optimal {
                failures += 1;
            }
        }
    }
    Outcome::new(
        failures == 0 && worst_obj <= 1e-6 && worst_kkt <= 1e-6,
        format!(
            "20 instances at each size {sizes:?}, worst objective error {worst_obj:.1e}, KKT residual {worst_kkt:.1e}, {failures} failures"
        ),
    )
}

// ---------------------------------------------------------------- 12

/// Best CRB over a phase grid for both elements, refined around the best cell.
fn mesh_optimum(ch: &ChannelSet, cfg: &SystemConfig, mode: TargetMode, receiver: ReceiverType) -> f64 {
    let eval = |p: [f64; 2]| {
        let v = CVector::from_fn(2, |i, _| Complex64::from_polar(1.0, p[i]));
        solve_tx(ch, &v, cfg, mode, receiver).map_or(f64::INFINITY, |s| s.objective)
    };
    let points = 20;
    let mut step = TAU / points as f64;
    let mut best = ([0.0, 0.0], f64::INFINITY);
    for i in 0..points {
        for j in 0..points {
            let p = [i as f64 * step, j as f64 * step];
            let val = eval(p);
            if val < best.1 {
                best = (p, val);
            }
        }
    }
    for _ in 0..6 {
        let centre = best.0;
        for i in -2..=2 {
            for j in -2..=2 {
                let p = [centre[0] + i as f64 * step / 2.0, centre[1] + j as f64 * step / 2.0];
                let val = eval(p);
                if val < best.1 {
                    best = (p, val);
                }
            }
        }
        step /= 2.0;
    }
    best.1
}

fn criterion_12() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut failures = Vec::new();
    for trial in 0..4 {
        let cfg = SystemConfig { m: 2, n: 2, ..SystemConfig::default() }.with_users(1, db_to_linear(10.0));
        let seed = trial_seed(12, trial);
        let ch = generate_channels(&cfg, seed).unwrap();
        for mode in TARGETS {
            for receiver in RECEIVERS {
                let mesh = mesh_optimum(&ch, &cfg, mode, receiver);
                if !mesh.is_finite() {
                    continue;
                }
                cases += 1;
                match run_alternating(&ch, &cfg, mode, receiver, seed) {
                    Ok((sol, _)) => {
                        let gap = (sol.crb - mesh).abs() / mesh;
                        worst = worst.max(gap);
                    }
                    Err(e) => failures.push(format!("trial {trial} {mode}/{receiver}: {e}")),
                }
            }
        }
    }
    let mut detail = format!("{cases} tiny instances, worst relative gap to the refined mesh {worst:.2e}");
    if let Some(f) = failures.first() {
        detail += &format!(", {} failures (first: {f})", failures.len());
    }
    Outcome::new(failures.is_empty() && cases > 0 && worst <= 0.05, detail)
}

// ---------------------------------------------------------------- 13

fn criterion_13() -> Outcome {
    let spec = ExperimentSpec {
        base: SystemConfig { m: 4, n: 4, ..SystemConfig::default() }.with_users(2, 1.0),
        sweep_db: vec![5.0],
        trials: 2,
        ..ExperimentSpec::default()
    };
    let csv = |spec: &ExperimentSpec| run_experiment(spec).and_then(|rows| to_csv(spec, &rows));
    let first = csv(&spec);
    let second = csv(&spec);
    let single = csv(&ExperimentSpec { jobs: Some(1), ..spec.clone() });
    match (first, second, single) {
        (Ok(a), Ok(b), Ok(c)) => Outcome::new(
            a == b && a == c,
            format!("{} bytes, repeat identical: {}, single-thread identical: {}", a.len(), a == b, a == c),
        ),
        (a, b, c) => Outcome::new(
            false,
            format!("experiment failed: {:?}", [a.err(), b.err(), c.err()].into_iter().flatten().next()),
        ),
    }
}

// ---------------------------------------------------------------- report

fn timed(limit_s: Option<f64>, f: impl FnOnce() -> Outcome) -> Outcome {
    let started = Instant::now();
    let mut out = f();
    let secs = started.elapsed().as_secs_f64();
    match limit_s {
        Some(limit) => {
            out.pass &= secs < limit;
            out.detail += &format!(" [{secs:.1} s, limit {limit:.0} s]");
        }
        None => out.detail += &format!(" [{secs:.1} s]"),
    }
    out
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |id: usize, out: Outcome| {
        println!("criterion {id:>2}: {} {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
        results.push((id, out));
    };

    let started = Instant::now();
    let stats = tightness_suite();
    let suite_secs = started.elapsed().as_secs_f64();
    let mut c1 = criterion_1(&stats);
    c1.pass &= suite_secs < 600.0;
    c1.detail += &format!(" [{suite_secs:.1} s, limit 600 s]");
    report(1, c1);
    report(2, criterion_2(&stats));
    report(3, timed(None, criterion_3));
    report(4, timed(None, criterion_4));
    report(5, timed(Some(120.0), criterion_5));
    report(6, timed(None, criterion_6));

    let mut runs = Runs::new();
    report(7, timed(Some(900.0), || criterion_7(&mut runs)));
    report(8, timed(None, || criterion_8(&mut runs)));
    report(9, timed(None, || criterion_9(&mut runs)));
    for e in &runs.errors {
        println!("    run error: {e}");
    }
    report(10, timed(None, || criterion_10(&runs)));
    report(11, timed(None, criterion_11));
    report(12, timed(Some(600.0), criterion_12));
    report(13, timed(None, criterion_13));

    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(id, _)| *id).collect();
    println!("{} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
