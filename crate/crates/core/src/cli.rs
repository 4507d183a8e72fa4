//! Experiment runner: parameter sweeps over the analytic model, the optimizer,
//! the baselines and the Monte Carlo engine, emitted as one CSV table.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aoi::Age;
use crate::baselines::{noma_evaluate, sdma_evaluate, SchemeTag, NOMA_DESIGN_SAMPLES};
use crate::error::{Error, Result};
use crate::model::{validate_config, CommonPrecoderMode, SystemConfig};
use crate::optimizer::{default_starts, multistart_optimize, trace_rows, QosParams, ScaOptions, Solution, TraceRow};
use crate::simulator::{run_monte_carlo, RawTraceRow, SimMode, SimOptions, SimResult};

pub const CSV_HEADER: &str = "experiment,scheme,mode,sweep_param,sweep_value,user,stream,aaoi_s,bler,ci_halfwidth,seed,n_trials";

/// RNG stream of the NOMA design draws, disjoint from the simulator's trajectory streams.
const NOMA_DESIGN_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentId {
    ValidateAnalytic,
    CsitCompare,
    Convergence,
    SweepPower,
    SweepVelocity,
    SweepBlocklength,
    SweepAntennas,
    MaxaoiPower,
    MaxaoiBlocklength,
    LambdaTradeoff,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::ValidateAnalytic,
        ExperimentId::CsitCompare,
        ExperimentId::Convergence,
        ExperimentId::SweepPower,
        ExperimentId::SweepVelocity,
        ExperimentId::SweepBlocklength,
        ExperimentId::SweepAntennas,
        ExperimentId::MaxaoiPower,
        ExperimentId::MaxaoiBlocklength,
        ExperimentId::LambdaTradeoff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::ValidateAnalytic => "validate-analytic",
            ExperimentId::CsitCompare => "csit-compare",
            ExperimentId::Convergence => "convergence",
            ExperimentId::SweepPower => "sweep-power",
            ExperimentId::SweepVelocity => "sweep-velocity",
            ExperimentId::SweepBlocklength => "sweep-blocklength",
            ExperimentId::SweepAntennas => "sweep-antennas",
            ExperimentId::MaxaoiPower => "maxaoi-power",
            ExperimentId::MaxaoiBlocklength => "maxaoi-blocklength",
            ExperimentId::LambdaTradeoff => "lambda-tradeoff",
        }
    }

    /// Swept configuration key.
    pub fn sweep_param(self) -> SweepParam {
        match self {
            ExperimentId::ValidateAnalytic | ExperimentId::CsitCompare | ExperimentId::SweepVelocity => SweepParam::VelocityKmh,
            ExperimentId::Convergence => SweepParam::Iteration,
            ExperimentId::SweepPower | ExperimentId::MaxaoiPower => SweepParam::TxPowerDbm,
            ExperimentId::SweepBlocklength | ExperimentId::MaxaoiBlocklength | ExperimentId::LambdaTradeoff => SweepParam::Blocklength,
            ExperimentId::SweepAntennas => SweepParam::NAntennas,
        }
    }

    /// Key of the secondary parameter drawn as separate curves, if any.
    pub fn series_param(self) -> Option<SweepParam> {
        match self {
            ExperimentId::MaxaoiPower | ExperimentId::MaxaoiBlocklength => Some(SweepParam::VelocityKmh),
            ExperimentId::LambdaTradeoff => Some(SweepParam::Lambda),
            _ => None,
        }
    }

    fn rsma_only(self) -> bool {
        matches!(
            self,
            ExperimentId::ValidateAnalytic | ExperimentId::CsitCompare | ExperimentId::Convergence | ExperimentId::LambdaTradeoff
        )
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = ExperimentId::ALL.iter().map(|e| e.as_str()).collect();
            Error::InvalidArgument(format!("unknown experiment `{s}` (expected one of {})", known.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    TxPowerDbm,
    VelocityKmh,
    Blocklength,
    NAntennas,
    Lambda,
    Iteration,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::TxPowerDbm => "tx_power_dbm",
            SweepParam::VelocityKmh => "velocity_kmh",
            SweepParam::Blocklength => "blocklength",
            SweepParam::NAntennas => "n_antennas",
            SweepParam::Lambda => "lambda",
            SweepParam::Iteration => "iteration",
        }
    }

    /// `cfg` with this parameter set to `value`.
    pub fn apply(self, cfg: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let whole = |v: f64| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidArgument(format!("{} must be a positive integer, got {v}", self.as_str())))
            }
        };
        let mut c = cfg.clone();
        match self {
            SweepParam::TxPowerDbm => c.tx_power_dbm = value,
            SweepParam::VelocityKmh => c.velocity_mps = value / 3.6,
            SweepParam::Blocklength => c = c.with_blocklength(whole(value)?),
            SweepParam::NAntennas => c.n_antennas = whole(value)?,
            SweepParam::Lambda => c.qos_lambda = value,
            SweepParam::Iteration => {}
        }
        Ok(c)
    }
}

/// What to run: the experiment, its grid, the compared schemes and where the table goes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    /// Values of [`ExperimentId::sweep_param`]; ignored by `convergence`.
    pub sweep: Vec<f64>,
    /// Values of [`ExperimentId::series_param`] for the experiments that draw several curves.
    pub series: Vec<f64>,
    pub schemes: Vec<SchemeTag>,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    /// The default grid of each experiment.
    pub fn new(id: ExperimentId) -> Self {
        let (sweep, series): (Vec<f64>, Vec<f64>) = match id {
            ExperimentId::ValidateAnalytic => (vec![100.0, 200.0], vec![]),
            // 0 km/h stands for perfect CSIT.
            ExperimentId::CsitCompare => (vec![0.0, 100.0, 200.0], vec![]),
            ExperimentId::Convergence => (vec![], vec![]),
            ExperimentId::SweepPower => (vec![25.0, 30.0, 35.0, 40.0], vec![]),
            ExperimentId::SweepVelocity => (vec![50.0, 100.0, 150.0, 200.0], vec![]),
            ExperimentId::SweepBlocklength => (vec![200.0, 300.0, 400.0, 500.0], vec![]),
            ExperimentId::SweepAntennas => (vec![4.0, 5.0, 6.0, 7.0], vec![]),
            ExperimentId::MaxaoiPower => (vec![25.0, 30.0, 35.0, 40.0], vec![100.0, 200.0]),
            ExperimentId::MaxaoiBlocklength => (vec![200.0, 300.0, 400.0, 500.0], vec![100.0, 200.0]),
            ExperimentId::LambdaTradeoff => (vec![200.0, 300.0, 400.0, 500.0], vec![0.8, 0.95]),
        };
        let schemes = if id.rsma_only() { vec![SchemeTag::Rsma] } else { vec![SchemeTag::Rsma, SchemeTag::Sdma, SchemeTag::Noma] };
        Self { id, sweep, series, schemes, out: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::InvalidArgument("the scheme list is empty".into()));
        }
        if self.id.rsma_only() {
            if let Some(s) = self.schemes.iter().find(|s| **s != SchemeTag::Rsma) {
                return Err(Error::InvalidArgument(format!("experiment {} evaluates rsma only, got {}", self.id.as_str(), s.as_str())));
            }
        }
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite());
        if self.id != ExperimentId::Convergence && (self.sweep.is_empty() || !sorted(&self.sweep)) {
            return Err(Error::InvalidArgument(format!("sweep grid must be nonempty, finite and strictly increasing: {:?}", self.sweep)));
        }
        if self.id.series_param().is_some() && (self.series.is_empty() || !sorted(&self.series)) {
            return Err(Error::InvalidArgument(format!("series grid must be nonempty, finite and strictly increasing: {:?}", self.series)));
        }
        Ok(())
    }
}

/// Execution knobs that do not change the numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub workers: usize,
    /// Slots of raw per-slot trace kept from Monte Carlo runs (first trajectory only).
    pub raw_trace_slots: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1, raw_trace_slots: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    Analytic,
    Montecarlo,
    Optimized,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Analytic => "analytic",
            Mode::Montecarlo => "montecarlo",
            Mode::Optimized => "optimized",
        }
    }
}

/// The `user` column: a user index or an aggregate over users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum UserField {
    Index(usize),
    Max,
    Mean,
}

impl std::fmt::Display for UserField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UserField::Index(i) => write!(f, "{i}"),
            UserField::Max => f.write_str("max"),
            UserField::Mean => f.write_str("mean"),
        }
    }
}

/// One CSV row. A `None` age marks a grid point whose evaluation failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: &'static str,
    pub scheme: String,
    pub mode: Mode,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub user: UserField,
    pub stream: &'static str,
    pub aaoi_s: Option<f64>,
    pub bler: Option<f64>,
    pub ci_halfwidth: Option<f64>,
    pub seed: u64,
    pub n_trials: usize,
}

impl ResultRow {
    fn sort_key(&self) -> (&str, &str, &str, Mode, u64, UserField, &str) {
        // Non-negative finite sweep values order like their bit patterns; others fall back to the total order.
        let v = if self.sweep_value >= 0.0 { self.sweep_value.to_bits() } else { 0 };
        (self.experiment, self.scheme.as_str(), self.sweep_param.as_str(), self.mode, v, self.user, self.stream)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    /// Optimizer traces of every RSMA solve, in grid order.
    pub traces: Vec<(String, f64, Vec<TraceRow>)>,
    pub raw_trace: Vec<RawTraceRow>,
    /// One message per failed grid point.
    pub diagnostics: Vec<String>,
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes the table with [`CSV_HEADER`]; failed points show `nan` ages.
pub fn write_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.scheme,
            r.mode.as_str(),
            r.sweep_param,
            fmt_f64(r.sweep_value),
            r.user,
            r.stream,
            r.aaoi_s.map_or_else(|| "nan".into(), fmt_f64),
            opt(r.bler),
            opt(r.ci_halfwidth),
            r.seed,
            r.n_trials
        );
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Writes the table to `path`, replacing any previous file.
pub fn emit_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

/// Writes every optimizer trace with the grid point prefixed to the trace columns.
pub fn write_traces<W: Write>(traces: &[(String, f64, Vec<TraceRow>)], mut out: W) -> Result<()> {
    let mut s = String::from("sweep_param,sweep_value,start,step,iteration,objective,max_constraint_violation\n");
    for (param, value, rows) in traces {
        for r in rows {
            let _ = writeln!(
                s,
                "{param},{},{},{},{},{},{}",
                fmt_f64(*value),
                r.start,
                r.step,
                r.iteration,
                fmt_f64(r.objective),
                fmt_f64(r.max_constraint_violation)
            );
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// One slot per row: `slot,user,stream,sinr,success,aoi_s`.
pub fn write_raw_trace<W: Write>(rows: &[RawTraceRow], mut out: W) -> Result<()> {
    let mut s = String::from("slot,user,stream,sinr,success,aoi_s\n");
    for r in rows {
        let stream = match r.stream {
            crate::simulator::TraceStream::Common => "common",
            crate::simulator::TraceStream::Private => "private",
        };
        let _ = writeln!(s, "{},{},{stream},{},{},{}", r.slot, r.user, fmt_f64(r.sinr), r.success as u8, fmt_f64(r.aoi_s));
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn age(a: Age) -> Option<f64> {
    Some(a.seconds())
}

/// Everything computed at one grid point, before formatting.
struct PointOutput {
    rows: Vec<ResultRow>,
    trace: Option<Vec<TraceRow>>,
    raw: Vec<RawTraceRow>,
    diagnostics: Vec<String>,
}

struct RowBuilder<'a> {
    spec: &'a ExperimentSpec,
    param: String,
    value: f64,
    seed: u64,
}

impl RowBuilder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row(&self, scheme: &str, mode: Mode, user: UserField, stream: &'static str, aaoi: Option<f64>, bler: Option<f64>, ci: Option<f64>, n_trials: usize) -> ResultRow {
        ResultRow {
            experiment: self.spec.id.as_str(),
            scheme: scheme.to_string(),
            mode,
            sweep_param: self.param.clone(),
            sweep_value: self.value,
            user,
            stream,
            aaoi_s: aaoi,
            bler,
            ci_halfwidth: ci,
            seed: self.seed,
            n_trials,
        }
    }
}

fn optimize_rsma(cfg: &SystemConfig) -> Result<Solution> {
    let budget = validate_config(cfg)?;
    multistart_optimize(cfg, &budget, Some(QosParams::from_config(cfg)), &default_starts(cfg.n_users), &ScaOptions::default())
}

/// Summary rows of every requested scheme at one configuration.
fn scheme_rows(b: &RowBuilder, cfg: &SystemConfig, max_only: bool, out: &mut PointOutput) {
    let user = if max_only { UserField::Max } else { UserField::Mean };
    for &scheme in &b.spec.schemes {
        match scheme {
            SchemeTag::Rsma => match optimize_rsma(cfg) {
                Ok(sol) => {
                    let (common, overall) = if max_only {
                        (Age::max(&sol.aaoi.aaoi_common), sol.aaoi.max_overall)
                    } else {
                        (sol.aaoi.mean_common, sol.aaoi.mean_overall)
                    };
                    out.rows.push(b.row("rsma-common", Mode::Optimized, user, "common", age(common), None, None, 0));
                    out.rows.push(b.row("rsma-overall", Mode::Optimized, user, "overall", age(overall), None, None, 0));
                    out.trace = Some(trace_rows(&sol));
                }
                Err(e) => {
                    out.diagnostics.push(format!("{} {}={}: rsma: {e}", b.spec.id.as_str(), b.param, b.value));
                    out.rows.push(b.row("rsma-common", Mode::Optimized, user, "common", None, None, None, 0));
                    out.rows.push(b.row("rsma-overall", Mode::Optimized, user, "overall", None, None, None, 0));
                }
            },
            SchemeTag::Sdma | SchemeTag::Noma => {
                let n = if scheme == SchemeTag::Noma { NOMA_DESIGN_SAMPLES } else { 0 };
                let res = validate_config(cfg).and_then(|budget| {
                    if scheme == SchemeTag::Sdma {
                        sdma_evaluate(cfg, &budget)
                    } else {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
                        rng.set_stream(NOMA_DESIGN_STREAM);
                        noma_evaluate(cfg, &budget, &mut rng)
                    }
                });
                let value = res.map(|r| if max_only { r.max_aaoi } else { r.mean_aaoi });
                if let Err(e) = &value {
                    out.diagnostics.push(format!("{} {}={}: {}: {e}", b.spec.id.as_str(), b.param, b.value, scheme.as_str()));
                }
                out.rows.push(b.row(scheme.as_str(), Mode::Optimized, user, "overall", value.ok().and_then(age), None, None, n));
            }
        }
    }
}

fn sim_rows(b: &RowBuilder, sim: &SimResult, out: &mut PointOutput) {
    let n = sim.n_trials;
    for (u, est) in sim.users.iter().enumerate() {
        if let (Some(a), Some(e)) = (est.aaoi_common, est.bler_common) {
            out.rows.push(b.row("rsma", Mode::Montecarlo, UserField::Index(u), "common", Some(a.value), Some(e.value), Some(a.ci_halfwidth), n));
        }
        let (a, e) = (est.aaoi_overall, est.bler_overall);
        out.rows.push(b.row("rsma", Mode::Montecarlo, UserField::Index(u), "overall", Some(a.value), Some(e.value), Some(a.ci_halfwidth), n));
    }
    if let Some(m) = sim.mean_aaoi_common {
        out.rows.push(b.row("rsma", Mode::Montecarlo, UserField::Mean, "common", Some(m.value), None, Some(m.ci_halfwidth), n));
    }
    let m = sim.mean_aaoi_overall;
    out.rows.push(b.row("rsma", Mode::Montecarlo, UserField::Mean, "overall", Some(m.value), None, Some(m.ci_halfwidth), n));
}

/// Optimizes RSMA, then reports closed-form and Monte Carlo ages of the optimized point.
fn analytic_vs_sim(b: &RowBuilder, cfg_opt: &SystemConfig, cfg_sim: &SystemConfig, perfect: bool, run: &RunOptions, out: &mut PointOutput) {
    let sol = match optimize_rsma(cfg_opt) {
        Ok(s) => s,
        Err(e) => {
            out.diagnostics.push(format!("{} {}={}: rsma: {e}", b.spec.id.as_str(), b.param, b.value));
            for stream in ["common", "overall"] {
                out.rows.push(b.row("rsma", Mode::Analytic, UserField::Mean, stream, None, None, None, 0));
            }
            return;
        }
    };
    let a = &sol.aaoi;
    for u in 0..cfg_opt.n_users {
        out.rows.push(b.row("rsma", Mode::Analytic, UserField::Index(u), "common", age(a.aaoi_common[u]), Some(a.bler.eps_common[u]), None, 0));
        out.rows.push(b.row("rsma", Mode::Analytic, UserField::Index(u), "overall", age(a.aaoi_overall[u]), Some(a.bler.eps_overall[u]), None, 0));
    }
    out.rows.push(b.row("rsma", Mode::Analytic, UserField::Mean, "common", age(a.mean_common), None, None, 0));
    out.rows.push(b.row("rsma", Mode::Analytic, UserField::Mean, "overall", age(a.mean_overall), None, None, 0));
    out.trace = Some(trace_rows(&sol));
    let opts = SimOptions {
        mode: SimMode::SlotAoi,
        common_precoder: CommonPrecoderMode::Random,
        perfect_csit: perfect,
        workers: run.workers,
        raw_trace_slots: run.raw_trace_slots,
        ..Default::default()
    };
    match run_monte_carlo(cfg_sim, &sol.alloc, &sol.split, &opts) {
        Ok(sim) => {
            sim_rows(b, &sim, out);
            out.raw = sim.raw_trace;
        }
        Err(e) => {
            out.diagnostics.push(format!("{} {}={}: monte carlo: {e}", b.spec.id.as_str(), b.param, b.value));
            out.rows.push(b.row("rsma", Mode::Montecarlo, UserField::Mean, "overall", None, None, None, cfg_sim.n_trials));
        }
    }
}

fn convergence(spec: &ExperimentSpec, cfg: &SystemConfig) -> PointOutput {
    let mut out = PointOutput { rows: Vec::new(), trace: None, raw: Vec::new(), diagnostics: Vec::new() };
    match optimize_rsma(cfg) {
        Ok(sol) => {
            let trace = trace_rows(&sol);
            for r in trace.iter().filter(|r| r.start == sol.selected_start) {
                let b = RowBuilder { spec, param: format!("{}_step{}", SweepParam::Iteration.as_str(), r.step), value: r.iteration as f64, seed: cfg.rng_seed };
                out.rows.push(b.row("rsma", Mode::Optimized, UserField::Mean, "overall", Some(r.objective), None, None, 0));
            }
            out.trace = Some(trace);
        }
        Err(e) => out.diagnostics.push(format!("convergence: {e}")),
    }
    out
}

/// One unit of work: a sweep value and, for multi-curve experiments, a series value.
#[derive(Debug, Clone, Copy)]
struct GridPoint {
    value: f64,
    series: Option<f64>,
}

fn run_point(spec: &ExperimentSpec, cfg: &SystemConfig, point: GridPoint, run: &RunOptions) -> Result<PointOutput> {
    let param = spec.id.sweep_param();
    let mut at = param.apply(cfg, point.value)?;
    let mut label = param.as_str().to_string();
    if let (Some(sp), Some(sv)) = (spec.id.series_param(), point.series) {
        at = sp.apply(&at, sv)?;
        label = format!("{label};{}={}", sp.as_str(), fmt_f64(sv));
    }
    let b = RowBuilder { spec, param: label, value: point.value, seed: cfg.rng_seed };
    let mut out = PointOutput { rows: Vec::new(), trace: None, raw: Vec::new(), diagnostics: Vec::new() };
    match spec.id {
        ExperimentId::ValidateAnalytic => analytic_vs_sim(&b, &at, &at, false, run, &mut out),
        ExperimentId::CsitCompare => {
            // Perfect CSIT: the analysis sees ρ = 1, the simulator precodes on the current channel
            // while the channel keeps evolving at the configured velocity.
            let perfect = point.value == 0.0;
            let sim_cfg = if perfect { cfg.clone() } else { at.clone() };
            analytic_vs_sim(&b, &at, &sim_cfg, perfect, run, &mut out)
        }
        ExperimentId::MaxaoiPower | ExperimentId::MaxaoiBlocklength => scheme_rows(&b, &at, true, &mut out),
        _ => scheme_rows(&b, &at, false, &mut out),
    }
    Ok(out)
}

fn map_points<F>(points: &[GridPoint], workers: usize, f: F) -> Result<Vec<Result<PointOutput>>>
where
    F: Fn(GridPoint) -> Result<PointOutput> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
        Ok(pool.install(|| points.par_iter().map(|&p| f(p)).collect()))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        Ok(points.iter().map(|&p| f(p)).collect())
    }
}

/// Runs every grid point of `spec` on `cfg` and returns the rows sorted by
/// (experiment, scheme, sweep parameter, mode, sweep value, user, stream).
///
/// A failing grid point yields rows with a missing age plus a diagnostic; the run continues.
pub fn run_experiment(spec: &ExperimentSpec, cfg: &SystemConfig, run: &RunOptions) -> Result<ResultTable> {
    spec.validate()?;
    validate_config(cfg)?;
    let mut table = ResultTable::default();
    let outputs = if spec.id == ExperimentId::Convergence {
        vec![Ok(convergence(spec, cfg))]
    } else {
        let series: Vec<Option<f64>> = if spec.id.series_param().is_some() { spec.series.iter().map(|&s| Some(s)).collect() } else { vec![None] };
        let points: Vec<GridPoint> = series.iter().flat_map(|&s| spec.sweep.iter().map(move |&v| GridPoint { value: v, series: s })).collect();
        map_points(&points, run.workers, |p| run_point(spec, cfg, p, run))?
    };
    for out in outputs {
        let out = out?;
        if let (Some(trace), Some(first)) = (out.trace, out.rows.first()) {
            table.traces.push((first.sweep_param.clone(), first.sweep_value, trace));
        }
        table.rows.extend(out.rows);
        if table.raw_trace.is_empty() {
            table.raw_trace = out.raw;
        }
        table.diagnostics.extend(out.diagnostics);
    }
    table.rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &str, v: f64) -> ResultRow {
        ResultRow {
            experiment: "sweep-power",
            scheme: scheme.into(),
            mode: Mode::Optimized,
            sweep_param: "tx_power_dbm".into(),
            sweep_value: v,
            user: UserField::Mean,
            stream: "overall",
            aaoi_s: Some(3.5e-4),
            bler: None,
            ci_halfwidth: None,
            seed: 1,
            n_trials: 0,
        }
    }

    #[test]
    fn ids_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("sweep-doppler".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn one_row_table_is_two_lines() {
        let mut buf = Vec::new();
        write_csv(&[row("sdma", 30.0)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().nth(1).unwrap(), "sweep-power,sdma,optimized,tx_power_dbm,30,mean,overall,0.00035,,,1,0");
    }

    #[test]
    fn empty_scheme_list_is_rejected() {
        let spec = ExperimentSpec { schemes: vec![], ..ExperimentSpec::new(ExperimentId::SweepPower) };
        assert!(run_experiment(&spec, &SystemConfig::default(), &RunOptions::default()).is_err());
        let unsorted = ExperimentSpec { sweep: vec![30.0, 25.0], ..ExperimentSpec::new(ExperimentId::SweepPower) };
        assert!(unsorted.validate().is_err());
        let wrong = ExperimentSpec { schemes: vec![SchemeTag::Sdma], ..ExperimentSpec::new(ExperimentId::LambdaTradeoff) };
        assert!(wrong.validate().is_err());
    }

    #[test]
    fn rows_sort_by_scheme_then_value() {
        let mut rows = vec![row("sdma", 40.0), row("noma", 25.0), row("sdma", 25.0), row("rsma-overall", 30.0)];
        rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let order: Vec<(String, f64)> = rows.iter().map(|r| (r.scheme.clone(), r.sweep_value)).collect();
        assert_eq!(order, vec![("noma".into(), 25.0), ("rsma-overall".into(), 30.0), ("sdma".into(), 25.0), ("sdma".into(), 40.0)]);
    }

    #[test]
    fn sweep_parameters_apply() {
        let cfg = SystemConfig::default();
        assert_eq!(SweepParam::Blocklength.apply(&cfg, 300.0).unwrap().blocklength_private, vec![300; 4]);
        assert!((SweepParam::VelocityKmh.apply(&cfg, 100.0).unwrap().velocity_kmh() - 100.0).abs() < 1e-12);
        assert!(SweepParam::NAntennas.apply(&cfg, 4.5).is_err());
    }
}
