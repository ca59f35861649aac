//! Monte-Carlo experiments: configuration, the trial runner, CSV output
//! and summaries.
//!
//! Channels are generated once per trial and shared by every scheme,
//! receiver type and SINR point of that trial, so all comparisons are
//! paired. Rows are written in canonical order whatever the thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::driver::{run_alternating, run_benchmark_separate, run_benchmark_tx_only, Termination};
use crate::error::{Error, Result};
use crate::scenario::{db_to_linear, dbm_to_watts, generate_channels, linear_to_db, ChannelSet, SystemConfig};
use crate::{ReceiverType, TargetMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Proposed,
    TxOnly,
    Separate,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Proposed => "proposed",
            Scheme::TxOnly => "txonly",
            Scheme::Separate => "separate",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "txonly" => Ok(Scheme::TxOnly),
            "separate" => Ok(Scheme::Separate),
            _ => Err(Error::Config(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub sweep_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub receivers: Vec<ReceiverType>,
    pub targets: Vec<TargetMode>,
    pub trials: usize,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    /// Fill `runtime_ms`; off by default so reruns are byte-identical.
    pub timing: bool,
    /// Append a channel fingerprint column for pairing checks.
    pub channel_hash: bool,
    pub jobs: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            base: SystemConfig::default(),
            sweep_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            schemes: vec![Scheme::Proposed, Scheme::TxOnly, Scheme::Separate],
            receivers: vec![ReceiverType::I, ReceiverType::II],
            targets: vec![TargetMode::Extended, TargetMode::Point],
            trials: 10,
            master_seed: 1,
            output: None,
            timing: false,
            channel_hash: false,
            jobs: None,
        }
    }
}

/// Config file layout. Every key is optional and falls back to the
/// defaults of [`ExperimentSpec`] and [`SystemConfig`].
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    scenario: ScenarioSection,
    experiment: ExperimentSection,
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ScenarioSection {
    #[serde(rename = "M")]
    m: Option<usize>,
    #[serde(rename = "N")]
    n: Option<usize>,
    #[serde(rename = "K")]
    k: Option<usize>,
    #[serde(rename = "T")]
    t: Option<usize>,
    p0_dbm: Option<f64>,
    sigma_r_dbm: Option<f64>,
    sigma_k_dbm: Option<f64>,
    k0_db: Option<f64>,
    alpha_bi: Option<f64>,
    alpha_iu: Option<f64>,
    alpha_bu: Option<f64>,
    rician: Option<f64>,
    shadow_db: Option<f64>,
    d_over_lambda: Option<f64>,
    wavelength: Option<f64>,
    rcs: Option<f64>,
    bs: Option<[f64; 2]>,
    irs: Option<[f64; 2]>,
    target: Option<[f64; 2]>,
    cu_corner_a: Option<[f64; 2]>,
    cu_corner_b: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ExperimentSection {
    gamma_db: Option<Vec<f64>>,
    schemes: Option<Vec<String>>,
    receivers: Option<Vec<String>>,
    targets: Option<Vec<String>>,
    trials: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OutputSection {
    path: Option<String>,
    timing: Option<bool>,
    channel_hash: Option<bool>,
}

fn parse_list<T: FromStr<Err = Error>>(xs: &[String]) -> Result<Vec<T>> {
    xs.iter().map(|s| s.parse()).collect()
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut spec = ExperimentSpec::default();
        let s = file.scenario;
        let b = &mut spec.base;
        let k = s.k.unwrap_or(b.k);
        b.m = s.m.unwrap_or(b.m);
        b.n = s.n.unwrap_or(b.n);
        b.t = s.t.unwrap_or(b.t);
        if let Some(x) = s.p0_dbm {
            b.p0 = dbm_to_watts(x);
        }
        if let Some(x) = s.sigma_r_dbm {
            b.sigma_r_sq = dbm_to_watts(x);
        }
        if let Some(x) = s.sigma_k_dbm {
            b.sigma_k_sq = vec![dbm_to_watts(x)];
        }
        if let Some(x) = s.k0_db {
            b.pathloss.k0 = db_to_linear(x);
        }
        b.pathloss.alpha_bi = s.alpha_bi.unwrap_or(b.pathloss.alpha_bi);
        b.pathloss.alpha_iu = s.alpha_iu.unwrap_or(b.pathloss.alpha_iu);
        b.pathloss.alpha_bu = s.alpha_bu.unwrap_or(b.pathloss.alpha_bu);
        b.rician_factor = s.rician.unwrap_or(b.rician_factor);
        b.shadow_std_db = s.shadow_db.unwrap_or(b.shadow_std_db);
        b.d_over_lambda = s.d_over_lambda.unwrap_or(b.d_over_lambda);
        b.wavelength = s.wavelength.unwrap_or(b.wavelength);
        b.rcs = s.rcs.unwrap_or(b.rcs);
        b.bs = s.bs.unwrap_or(b.bs);
        b.irs = s.irs.unwrap_or(b.irs);
        b.target = s.target.unwrap_or(b.target);
        b.cu_region = [s.cu_corner_a.unwrap_or(b.cu_region[0]), s.cu_corner_b.unwrap_or(b.cu_region[1])];
        spec.base = spec.base.clone().with_users(k, 1.0);

        let e = file.experiment;
        if let Some(x) = e.gamma_db {
            spec.sweep_db = x;
        }
        if let Some(x) = e.schemes {
            spec.schemes = parse_list(&x)?;
        }
        if let Some(x) = e.receivers {
            spec.receivers = parse_list(&x)?;
        }
        if let Some(x) = e.targets {
            spec.targets = parse_list(&x)?;
        }
        spec.trials = e.trials.unwrap_or(spec.trials);
        spec.master_seed = e.seed.unwrap_or(spec.master_seed);

        let o = file.output;
        spec.output = o.path.map(PathBuf::from);
        spec.timing = o.timing.unwrap_or(false);
        spec.channel_hash = o.channel_hash.unwrap_or(false);
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep_db.is_empty() || self.sweep_db.iter().any(|g| !g.is_finite()) {
            return Err(Error::Config("gamma_db must be a nonempty list of finite values".into()));
        }
        if self.schemes.is_empty() || self.receivers.is_empty() || self.targets.is_empty() {
            return Err(Error::Config("schemes, receivers and targets must be nonempty".into()));
        }
        self.base.clone().with_gamma(1.0).validate()
    }

    /// Resolved settings in the config file syntax.
    pub fn resolved(&self) -> String {
        let b = &self.base;
        let list = |xs: Vec<String>| format!("[{}]", xs.join(", "));
        let quoted = |xs: Vec<String>| list(xs.into_iter().map(|s| format!("{s:?}")).collect());
        let pair = |p: [f64; 2]| format!("[{:?}, {:?}]", p[0], p[1]);
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("scenario.M", b.m.to_string());
        kv("scenario.N", b.n.to_string());
        kv("scenario.K", b.k.to_string());
        kv("scenario.T", b.t.to_string());
        kv("scenario.p0_dbm", format!("{:?}", linear_to_db(b.p0) + 30.0));
        kv("scenario.sigma_r_dbm", format!("{:?}", linear_to_db(b.sigma_r_sq) + 30.0));
        kv("scenario.sigma_k_dbm", format!("{:?}", linear_to_db(b.sigma_k_sq[0]) + 30.0));
        kv("scenario.k0_db", format!("{:?}", linear_to_db(b.pathloss.k0)));
        kv("scenario.alpha_bi", format!("{:?}", b.pathloss.alpha_bi));
        kv("scenario.alpha_iu", format!("{:?}", b.pathloss.alpha_iu));
        kv("scenario.alpha_bu", format!("{:?}", b.pathloss.alpha_bu));
        kv("scenario.rician", format!("{:?}", b.rician_factor));
        kv("scenario.shadow_db", format!("{:?}", b.shadow_std_db));
        kv("scenario.d_over_lambda", format!("{:?}", b.d_over_lambda));
        kv("scenario.wavelength", format!("{:?}", b.wavelength));
        kv("scenario.rcs", format!("{:?}", b.rcs));
        kv("scenario.bs", pair(b.bs));
        kv("scenario.irs", pair(b.irs));
        kv("scenario.target", pair(b.target));
        kv("scenario.cu_corner_a", pair(b.cu_region[0]));
        kv("scenario.cu_corner_b", pair(b.cu_region[1]));
        kv("experiment.gamma_db", list(self.sweep_db.iter().map(|g| format!("{g:?}")).collect()));
        kv("experiment.schemes", quoted(self.schemes.iter().map(|s| s.to_string()).collect()));
        kv("experiment.receivers", quoted(self.receivers.iter().map(|s| s.to_string()).collect()));
        kv("experiment.targets", quoted(self.targets.iter().map(|s| s.to_string()).collect()));
        kv("experiment.trials", self.trials.to_string());
        kv("experiment.seed", self.master_seed.to_string());
        kv("output.timing", self.timing.to_string());
        kv("output.channel_hash", self.channel_hash.to_string());
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowStatus {
    Converged,
    MaxIter,
    Stalled,
    Infeasible,
    Numerical,
}

impl RowStatus {
    /// True when the row carries a usable solution.
    pub fn has_solution(self) -> bool {
        matches!(self, RowStatus::Converged | RowStatus::MaxIter | RowStatus::Stalled)
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for RowStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Converged" => RowStatus::Converged,
            "MaxIter" => RowStatus::MaxIter,
            "Stalled" => RowStatus::Stalled,
            "Infeasible" => RowStatus::Infeasible,
            "Numerical" => RowStatus::Numerical,
            _ => return Err(Error::Config(format!("unknown status {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub trial: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub receiver: ReceiverType,
    pub target: TargetMode,
    pub gamma_db: f64,
    pub crb: f64,
    pub crb_db: f64,
    pub outer_iters: usize,
    pub status: RowStatus,
    pub tr_r0: f64,
    pub runtime_ms: Option<f64>,
    pub channel_hash: Option<u64>,
}

pub const COLUMNS: [&str; 12] = [
    "trial",
    "seed",
    "scheme",
    "receiver",
    "target",
    "gamma_db",
    "crb",
    "crb_db",
    "outer_iters",
    "status",
    "tr_R0",
    "runtime_ms",
];

/// Seed of one trial, shared by its channel draw and every run on it.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

fn run_one(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    scheme: Scheme,
    receiver: ReceiverType,
    target: TargetMode,
    seed: u64,
) -> (RowStatus, f64, usize, f64) {
    let out = match scheme {
        Scheme::Proposed => run_alternating(ch, cfg, target, receiver, seed),
        Scheme::TxOnly => run_benchmark_tx_only(ch, cfg, target, receiver, seed),
        Scheme::Separate => run_benchmark_separate(ch, cfg, target, receiver, seed),
    };
    match out {
        Ok((sol, trace)) => {
            let status = match trace.termination {
                Termination::Converged => RowStatus::Converged,
                Termination::MaxIter => RowStatus::MaxIter,
                Termination::Stalled => RowStatus::Stalled,
                Termination::Infeasible => RowStatus::Infeasible,
            };
            if sol.crb.is_finite() && sol.crb > 0.0 {
                (status, sol.crb, trace.outer_iterations(), sol.r0.trace())
            } else {
                (RowStatus::Numerical, f64::NAN, trace.outer_iterations(), f64::NAN)
            }
        }
        Err(Error::Infeasible(msg)) => {
            log::debug!("{scheme}/{receiver}/{target}: {msg}");
            (RowStatus::Infeasible, f64::NAN, 0, f64::NAN)
        }
        Err(e) => {
            log::warn!("{scheme}/{receiver}/{target} failed: {e}");
            (RowStatus::Numerical, f64::NAN, 0, f64::NAN)
        }
    }
}

fn run_trial(spec: &ExperimentSpec, trial: usize) -> Result<Vec<ResultRow>> {
    let seed = trial_seed(spec.master_seed, trial);
    let ch = generate_channels(&spec.base, seed)?;
    let hash = spec.channel_hash.then(|| ch.fingerprint());
    let mut rows = Vec::new();
    for &gamma_db in &spec.sweep_db {
        let cfg = spec.base.clone().with_gamma(db_to_linear(gamma_db));
        for &scheme in &spec.schemes {
            for &receiver in &spec.receivers {
                for &target in &spec.targets {
                    let started = Instant::now();
                    let (status, crb, outer_iters, tr_r0) = run_one(&ch, &cfg, scheme, receiver, target, seed);
                    let elapsed = started.elapsed().as_secs_f64() * 1e3;
                    log::info!("trial {trial} Γ={gamma_db} dB {scheme}/{receiver}/{target}: {status} {crb:e}");
                    rows.push(ResultRow {
                        trial,
                        seed,
                        scheme,
                        receiver,
                        target,
                        gamma_db,
                        crb,
                        crb_db: linear_to_db(crb),
                        outer_iters,
                        status,
                        tr_r0,
                        runtime_ms: spec.timing.then_some(elapsed),
                        channel_hash: hash,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Runs every (trial, Γ, scheme, receiver, target) combination and writes
/// the CSV when an output path is set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let out = match &spec.output {
        Some(p) => Some(fs::File::create(p)?),
        None => None,
    };
    let run = || -> Result<Vec<Vec<ResultRow>>> {
        (0..spec.trials).into_par_iter().map(|t| run_trial(spec, t)).collect()
    };
    let per_trial = match spec.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let rows: Vec<ResultRow> = per_trial.into_iter().flatten().collect();
    if let Some(mut f) = out {
        use std::io::Write;
        f.write_all(&to_csv(spec, &rows)?)?;
    }
    Ok(rows)
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        String::new()
    }
}

/// Serializes rows after a `#` comment header holding the resolved config.
pub fn to_csv(spec: &ExperimentSpec, rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for line in spec.resolved().lines() {
        buf.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    buf.extend_from_slice(b"# mean CRB in summaries is taken over rows with a solution\n");
    let mut w = csv::Writer::from_writer(buf);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if spec.channel_hash {
        header.push("channel_hash");
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.trial.to_string(),
            r.seed.to_string(),
            r.scheme.to_string(),
            r.receiver.to_string(),
            r.target.to_string(),
            format!("{:?}", r.gamma_db),
            num(r.crb),
            if r.crb.is_finite() { format!("{:.6}", r.crb_db) } else { String::new() },
            r.outer_iters.to_string(),
            r.status.to_string(),
            num(r.tr_r0),
            r.runtime_ms.map_or(String::new(), |t| format!("{t:.3}")),
        ];
        if spec.channel_hash {
            rec.push(r.channel_hash.map_or(String::new(), |h| format!("{h:016x}")));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let headers = rd.headers().map_err(csv_err)?.clone();
    if headers.len() < COLUMNS.len() || headers.iter().zip(COLUMNS).any(|(a, b)| a != b) {
        return Err(Error::Config(format!("{}: unexpected columns", path.display())));
    }
    let opt = |s: &str| -> Result<f64> {
        if s.is_empty() {
            Ok(f64::NAN)
        } else {
            s.parse().map_err(|_| Error::Config(format!("bad number {s:?}")))
        }
    };
    let int = |s: &str| -> Result<u64> { s.parse().map_err(|_| Error::Config(format!("bad integer {s:?}"))) };
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(ResultRow {
            trial: int(&rec[0])? as usize,
            seed: int(&rec[1])?,
            scheme: rec[2].parse()?,
            receiver: rec[3].parse()?,
            target: rec[4].parse()?,
            gamma_db: opt(&rec[5])?,
            crb: opt(&rec[6])?,
            crb_db: opt(&rec[7])?,
            outer_iters: int(&rec[8])? as usize,
            status: rec[9].parse()?,
            tr_r0: opt(&rec[10])?,
            runtime_ms: Some(opt(&rec[11])?).filter(|t| t.is_finite()),
            channel_hash: rec.get(12).and_then(|h| u64::from_str_radix(h, 16).ok()),
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub receiver: ReceiverType,
    pub target: TargetMode,
    pub gamma_db: f64,
    pub total: usize,
    pub feasible: usize,
    /// `10 log10` of the mean linear CRB over rows with a solution.
    pub mean_crb_db: Option<f64>,
}

impl SummaryRow {
    pub fn feasibility_rate(&self) -> f64 {
        self.feasible as f64 / self.total as f64
    }
}

/// Aggregates rows per (scheme, receiver, target, Γ).
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no rows to summarize".into()));
    }
    type Key = (Scheme, ReceiverType, TargetMode, i64);
    let mut groups: BTreeMap<Key, (f64, Vec<f64>, usize)> = BTreeMap::new();
    for r in rows {
        let key = (r.scheme, r.receiver, r.target, ordered_key(r.gamma_db));
        let g = groups.entry(key).or_insert((r.gamma_db, Vec::new(), 0));
        g.2 += 1;
        if r.status.has_solution() {
            g.1.push(r.crb);
        }
    }
    Ok(groups
        .into_iter()
        .map(|((scheme, receiver, target, _), (gamma_db, crbs, total))| SummaryRow {
            scheme,
            receiver,
            target,
            gamma_db,
            total,
            feasible: crbs.len(),
            mean_crb_db: (!crbs.is_empty()).then(|| linear_to_db(crbs.iter().sum::<f64>() / crbs.len() as f64)),
        })
        .collect())
}

/// Integer key ordering finite floats numerically.
fn ordered_key(x: f64) -> i64 {
    let b = x.to_bits() as i64;
    if b < 0 {
        b ^ i64::MAX
    } else {
        b
    }
}

pub fn render_summary(summary: &[SummaryRow]) -> String {
    let mut out = String::from("scheme     rx  target     gamma_db  feasible  mean_crb_db\n");
    for s in summary {
        let mean = s.mean_crb_db.map_or("-".to_string(), |m| format!("{m:.3}"));
        let _ = writeln!(
            out,
            "{:<10} {:<3} {:<10} {:>8.2}  {:>3}/{:<3}   {:>11}",
            s.scheme.to_string(),
            s.receiver.to_string(),
            s.target.to_string(),
            s.gamma_db,
            s.feasible,
            s.total,
            mean
        );
    }
    out
}

/// Gnuplot script with one inline data block per curve.
pub fn plot_script(summary: &[SummaryRow]) -> String {
    let mut curves: BTreeMap<(TargetMode, Scheme, ReceiverType), Vec<&SummaryRow>> = BTreeMap::new();
    for s in summary {
        curves.entry((s.target, s.scheme, s.receiver)).or_default().push(s);
    }
    let mut out = String::new();
    let mut plots: BTreeMap<TargetMode, Vec<String>> = BTreeMap::new();
    for ((target, scheme, receiver), pts) in &curves {
        let name = format!("{target}_{scheme}_{receiver}");
        let _ = writeln!(out, "${name} << EOD");
        for p in pts {
            if let Some(m) = p.mean_crb_db {
                let _ = writeln!(out, "{:?} {:?}", p.gamma_db, m);
            }
        }
        let _ = writeln!(out, "EOD");
        plots
            .entry(*target)
            .or_default()
            .push(format!("${name} using 1:2 with linespoints title \"{scheme} ({receiver})\""));
    }
    let _ = writeln!(out, "set xlabel \"SINR threshold (dB)\"\nset ylabel \"CRB (dB)\"\nset grid");
    for (target, items) in plots {
        let _ = writeln!(out, "set title \"{target} target\"");
        let _ = writeln!(out, "plot {}", items.join(", \\\n     "));
        let _ = writeln!(out, "pause -1");
    }
    out
}

/// Quick invariant checks on small random instances. Returns one
/// `(name, passed)` pair per check.
pub fn selftest() -> Vec<(&'static str, bool)> {
    use crate::metrics::{crb_point_reflect_form, crb_point_tx_form};
    use crate::scenario::random_reflection;
    use crate::txbf::{min_sinr_ratio, solve_tx};

    let mut out = Vec::new();
    let cfg = SystemConfig { m: 4, n: 4, ..SystemConfig::default() }.with_users(2, 10.0);
    let Ok(ch) = generate_channels(&cfg, 7) else {
        return vec![("channel generation", false)];
    };
    let v = random_reflection(4, &mut ChaCha8Rng::seed_from_u64(7));
    for (name, mode, receiver) in [
        ("extended/I relaxation tight", TargetMode::Extended, ReceiverType::I),
        ("extended/II relaxation tight", TargetMode::Extended, ReceiverType::II),
        ("point/I relaxation tight", TargetMode::Point, ReceiverType::I),
        ("point/II relaxation tight", TargetMode::Point, ReceiverType::II),
    ] {
        let ok = solve_tx(&ch, &v, &cfg, mode, receiver).is_ok_and(|s| {
            let sinr_ok = min_sinr_ratio(&ch, &v, &s.covariance(), &cfg, receiver).is_ok_and(|r| r >= 1.0 - 1e-6);
            (s.objective - s.sdr_objective).abs() <= 1e-6 * s.sdr_objective && sinr_ok
        });
        out.push((name, ok));
    }
    let tx = solve_tx(&ch, &v, &cfg, TargetMode::Point, ReceiverType::I).map(|s| s.covariance());
    out.push((
        "point bound forms agree",
        tx.is_ok_and(|tx| {
            let a = crb_point_tx_form(&ch, &v, &tx, cfg.sigma_r_sq, cfg.t).crb_value;
            crb_point_reflect_form(&ch, &v, &tx, cfg.sigma_r_sq, cfg.t)
                .is_ok_and(|b| (a - b.crb_value).abs() <= 1e-8 * a)
        }),
    ));
    for (name, mode) in [("extended trace monotone", TargetMode::Extended), ("point trace monotone", TargetMode::Point)] {
        let ok = run_alternating(&ch, &cfg, mode, ReceiverType::I, 3).is_ok_and(|(_, t)| t.is_nonincreasing(1e-6));
        out.push((name, ok));
    }
    let spec = ExperimentSpec {
        base: cfg.clone(),
        sweep_db: vec![5.0],
        schemes: vec![Scheme::TxOnly],
        trials: 2,
        ..ExperimentSpec::default()
    };
    let csv = || run_experiment(&spec).and_then(|rows| to_csv(&spec, &rows));
    out.push(("experiment reproducible", matches!((csv(), csv()), (Ok(a), Ok(b)) if a == b)));
    out
}
