//! Alternating optimization and the two benchmark schemes.

use std::fmt;
use std::time::Instant;

use conic::Status;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::TxCovariance;
use crate::numerics::{CVector, HermitianMatrix};
use crate::rbf::{build_reflect_data, solve_reflect, solve_reflect_extended};
use crate::scenario::{combined_channel, random_reflection, ChannelSet, SystemConfig};
use crate::txbf::{
    extract_rank_one, min_sinr_ratio, restructure_r0_zero, solve_power_min, solve_sensing_allocation, solve_tx, TxSolution,
};
use crate::{ReceiverType, TargetMode};

pub const OUTER_TOL: f64 = 1e-3;
pub const OUTER_MAX: usize = 20;
pub const INFEASIBLE_RETRIES: usize = 5;
const STALL_LIMIT: usize = 3;
/// Relative slack below which a CRB increase counts as solver noise.
const ACCEPT_TOL: f64 = 1e-9;
const MARGIN_STREAM: u64 = 0x6d61_7267;

#[derive(Clone, Debug)]
pub struct BeamformingSolution {
    pub w: Vec<CVector>,
    pub r0: HermitianMatrix,
    pub v: CVector,
    pub crb: f64,
    /// Common beam power scale `a` of the separate design.
    pub sensing_scale: Option<f64>,
}

impl BeamformingSolution {
    fn new(tx: &TxSolution, v: &CVector) -> Self {
        Self { w: tx.w.clone(), r0: tx.r0.clone(), v: v.clone(), crb: tx.objective, sensing_scale: None }
    }

    pub fn covariance(&self) -> TxCovariance {
        TxCovariance::from_beams(&self.w, self.r0.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
    Infeasible,
    Stalled,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "Converged",
            Termination::MaxIter => "MaxIter",
            Termination::Infeasible => "Infeasible",
            Termination::Stalled => "Stalled",
        })
    }
}

#[derive(Clone, Debug)]
pub struct IterationRecord {
    /// Best CRB so far.
    pub crb: f64,
    /// `SINR_k / Γ_k` of the accepted solution.
    pub sinr_ratio: Vec<f64>,
    pub tr_r0: f64,
    pub tx_status: Option<Status>,
    /// Whether the reflect step moved `v`.
    pub reflect_moved: bool,
    pub accepted: bool,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// Initial reflection vectors rejected as infeasible.
    pub retries: usize,
    /// Transmit power per stage-one iteration of the separate design.
    pub stage_one_power: Vec<f64>,
}

impl RunTrace {
    fn new() -> Self {
        Self { records: Vec::new(), termination: Termination::MaxIter, retries: 0, stage_one_power: Vec::new() }
    }

    pub fn crb_sequence(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.crb).collect()
    }

    /// Outer iterations after the initial transmit solve.
    pub fn outer_iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn is_nonincreasing(&self, rel_tol: f64) -> bool {
        self.records.windows(2).all(|w| w[1].crb <= w[0].crb * (1.0 + rel_tol))
    }
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xd1);
    rng
}

/// Seed for the randomization at one outer iteration.
fn reflect_seed(seed: u64, iteration: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (iteration as u64 + 1)
}

fn sinr_ratios(ch: &ChannelSet, v: &CVector, tx: &TxCovariance, cfg: &SystemConfig, receiver: ReceiverType) -> Vec<f64> {
    (0..ch.k())
        .map(|k| {
            crate::metrics::sinr(ch, v, tx, k, receiver, cfg.sigma_k_sq[k]).map_or(f64::NAN, |s| s / cfg.gamma[k])
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn record(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    receiver: ReceiverType,
    best: &BeamformingSolution,
    status: Option<Status>,
    moved: bool,
    accepted: bool,
    started: Instant,
) -> IterationRecord {
    IterationRecord {
        crb: best.crb,
        sinr_ratio: sinr_ratios(ch, &best.v, &best.covariance(), cfg, receiver),
        tr_r0: best.r0.trace(),
        tx_status: status,
        reflect_moved: moved,
        accepted,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    }
}

/// Draws reflection vectors until `solve` succeeds, up to the retry limit.
fn first_feasible<T>(
    n: usize,
    rng: &mut ChaCha8Rng,
    trace: &mut RunTrace,
    mut solve: impl FnMut(&CVector) -> Result<T>,
) -> Result<(CVector, T)> {
    let mut last = None;
    for attempt in 0..INFEASIBLE_RETRIES {
        let v = random_reflection(n, rng);
        match solve(&v) {
            Ok(t) => return Ok((v, t)),
            Err(e @ Error::Infeasible(_)) => {
                log::debug!("initial reflection {attempt} infeasible: {e}");
                trace.retries += 1;
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Infeasible("no initial reflection tried".into())))
}

/// Alternates transmit and reflect solves from a random reflection vector.
pub fn run_alternating(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    mode: TargetMode,
    receiver: ReceiverType,
    seed: u64,
) -> Result<(BeamformingSolution, RunTrace)> {
    let started = Instant::now();
    let mut rng = init_rng(seed);
    let mut trace = RunTrace::new();
    let (v0, tx) = first_feasible(ch.n(), &mut rng, &mut trace, |v| solve_tx(ch, v, cfg, mode, receiver))?;
    let mut best = BeamformingSolution::new(&tx, &v0);
    let mut best_tx = tx.covariance();
    let mut best_relaxed = tx.relaxed.clone();
    trace.records.push(record(ch, cfg, receiver, &best, Some(tx.solver_status), false, true, started));

    let mut stalls = 0;
    for l in 0..OUTER_MAX {
        let data = match single_user_design(ch, &best, best_relaxed.as_ref().unwrap_or(&best_tx)) {
            Some(folded) => build_reflect_data(ch, &folded, cfg, ReceiverType::II, mode),
            None => build_reflect_data(ch, &best_tx, cfg, receiver, mode),
        };
        let reflect = solve_reflect(&data, &best.v, reflect_seed(seed, l));
        let mut accepted = false;
        let mut status = None;
        let mut change = 0.0;
        // With every SINR tight, no draw may stay feasible at the old
        // transmit design; the re-solve then decides on the best raw draw
        // and on the margin-maximizing reflection.
        let mut candidates = Vec::new();
        if reflect.improved {
            candidates.push(reflect.v);
        } else {
            candidates.extend(reflect.unconstrained);
            if mode == TargetMode::Point {
                let widened = solve_reflect_extended(&data, &best.v, reflect_seed(seed, l) ^ MARGIN_STREAM);
                if widened.improved {
                    candidates.push(widened.v);
                }
            }
        }
        let moved = !candidates.is_empty();
        let mut next: Option<(TxSolution, CVector)> = None;
        for cand in candidates {
            match solve_tx(ch, &cand, cfg, mode, receiver) {
                Ok(tx) => {
                    status = Some(tx.solver_status);
                    if tx.objective > best.crb * (1.0 + ACCEPT_TOL) {
                        log::debug!("outer {l}: rejecting CRB {:e} above {:e}", tx.objective, best.crb);
                    } else if next.as_ref().is_none_or(|(t, _)| tx.objective < t.objective) {
                        next = Some((tx, cand));
                    }
                }
                Err(e) => log::debug!("outer {l}: transmit solve failed at new reflection: {e}"),
            }
        }
        if let Some((tx, cand)) = next {
            status = Some(tx.solver_status);
            change = (best.crb - tx.objective).abs() / best.crb;
            accepted = true;
            best_tx = tx.covariance();
            best_relaxed = tx.relaxed.clone();
            best = BeamformingSolution::new(&tx, &cand);
        }
        trace.records.push(record(ch, cfg, receiver, &best, status, moved, accepted, started));
        if accepted {
            stalls = 0;
            if change < OUTER_TOL {
                trace.termination = Termination::Converged;
                return Ok((best, trace));
            }
        } else {
            stalls += 1;
            if stalls >= STALL_LIMIT {
                trace.termination = Termination::Stalled;
                return Ok((best, trace));
            }
        }
    }
    trace.termination = Termination::MaxIter;
    Ok((best, trace))
}

/// With one CU both receiver types solve the same transmit relaxation.
/// Folding its covariance into the beam gives the split with the largest
/// SINR margin and no sensing leakage, so the reflect step sees the same
/// data under either receiver.
fn single_user_design(ch: &ChannelSet, best: &BeamformingSolution, tx: &TxCovariance) -> Option<TxCovariance> {
    if ch.k() != 1 {
        return None;
    }
    let h = combined_channel(ch, &best.v, 0).ok()?;
    let h = std::slice::from_ref(&h);
    let ex = extract_rank_one(&restructure_r0_zero(tx, h), h).ok()?;
    ex.degenerate.is_empty().then(|| TxCovariance::from_beams(&ex.w, ex.r0))
}

/// One transmit solve at a random reflection vector.
pub fn run_benchmark_tx_only(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    mode: TargetMode,
    receiver: ReceiverType,
    seed: u64,
) -> Result<(BeamformingSolution, RunTrace)> {
    let started = Instant::now();
    let mut rng = init_rng(seed);
    let v = random_reflection(ch.n(), &mut rng);
    let tx = solve_tx(ch, &v, cfg, mode, receiver)?;
    let best = BeamformingSolution::new(&tx, &v);
    let mut trace = RunTrace::new();
    trace.records.push(record(ch, cfg, receiver, &best, Some(tx.solver_status), false, true, started));
    trace.termination = Termination::Converged;
    Ok((best, trace))
}

/// Stage one minimizes communication power by alternation; stage two
/// scales the resulting beams and adds a sensing covariance.
pub fn run_benchmark_separate(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    mode: TargetMode,
    receiver: ReceiverType,
    seed: u64,
) -> Result<(BeamformingSolution, RunTrace)> {
    let started = Instant::now();
    let mut rng = init_rng(seed);
    let mut trace = RunTrace::new();
    let (mut v, mut comm) = first_feasible(ch.n(), &mut rng, &mut trace, |v| solve_power_min(ch, v, cfg))?;
    trace.stage_one_power.push(comm.objective);
    let mut stalls = 0;
    for l in 0..OUTER_MAX {
        // R0 = 0 here, so the receiver type does not change the SINR forms.
        let data = build_reflect_data(ch, &comm.covariance(), cfg, ReceiverType::II, TargetMode::Extended);
        let reflect = solve_reflect_extended(&data, &v, reflect_seed(seed, l));
        let mut accepted = false;
        let mut change = 0.0;
        if reflect.improved {
            if let Ok(next) = solve_power_min(ch, &reflect.v, cfg) {
                if next.objective <= comm.objective * (1.0 + ACCEPT_TOL) {
                    change = (comm.objective - next.objective).abs() / comm.objective;
                    comm = next;
                    v = reflect.v;
                    accepted = true;
                }
            }
        }
        trace.stage_one_power.push(comm.objective);
        if accepted {
            stalls = 0;
            if change < OUTER_TOL {
                break;
            }
        } else {
            stalls += 1;
            if stalls >= STALL_LIMIT {
                break;
            }
        }
    }
    let (tx, a) = solve_sensing_allocation(ch, &v, cfg, mode, receiver, &comm.w)?;
    let mut best = BeamformingSolution::new(&tx, &v);
    best.sensing_scale = Some(a);
    trace.records.push(record(ch, cfg, receiver, &best, Some(tx.solver_status), false, true, started));
    trace.termination = Termination::Converged;
    Ok((best, trace))
}

/// Smallest `SINR_k / Γ_k` of a finished solution.
pub fn min_ratio(ch: &ChannelSet, cfg: &SystemConfig, sol: &BeamformingSolution, receiver: ReceiverType) -> Result<f64> {
    min_sinr_ratio(ch, &sol.v, &sol.covariance(), cfg, receiver)
}
