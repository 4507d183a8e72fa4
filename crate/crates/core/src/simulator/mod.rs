//! Monte Carlo ground truth: empirical SINRs, average BLERs and slot-level
//! age trajectories over the Gauss–Markov channel.
//!
//! A run of `n_trials` channel realizations is cut into trajectories of
//! `batch_slots` slots. Every trajectory starts from its own pilot-only slot,
//! owns an RNG stream derived from `(seed, trajectory index)`, and discards a
//! warm-up before ages are averaged. Results are reduced in trajectory order,
//! so any worker count gives bit-identical output.

mod scheme;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use scheme::{RsmaScheme, SlotDecode, SlotScheme, StageOutcome};
pub use trace::{slot_aoi_trace, trace_with_warmup, AgeSummary, AgeTracker, AoiTrace, FailureProbs, DEFAULT_WARMUP_SLOTS};

use crate::aoi::aaoi_from_error_prob;
use crate::bler::compose_overall;
use crate::error::{Error, Result};
use crate::model::{evolve_channel, validate_config, ChannelState, CommonPrecoderMode, PowerAllocation, RateSplit, SystemConfig};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Consecutive channel redraws tolerated before a trajectory is abandoned.
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Average the per-slot BLERs and map the mean through `T/2 + T/(1-ε)`.
    AnalyticBlerCheck,
    /// Draw decoding outcomes per slot and time-average the resulting age.
    #[default]
    SlotAoi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub mode: SimMode,
    pub common_precoder: CommonPrecoderMode,
    /// Precode on the current channel instead of the one-slot-old one.
    pub perfect_csit: bool,
    pub workers: usize,
    pub warmup_slots: usize,
    pub keep_sinr_samples: bool,
    /// Slots of the first trajectory to keep as raw trace rows.
    pub raw_trace_slots: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            mode: SimMode::SlotAoi,
            common_precoder: CommonPrecoderMode::Random,
            perfect_csit: false,
            workers: 1,
            warmup_slots: DEFAULT_WARMUP_SLOTS,
            keep_sinr_samples: false,
            raw_trace_slots: 0,
        }
    }
}

/// Point estimate with a 95% half-width (`NaN` when a single trajectory gives no spread).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserEstimates {
    /// Mean BLER of the first-stage decode (common stream), when the scheme has one.
    pub bler_common: Option<Estimate>,
    /// Mean BLER of the second-stage decode, assuming the first one succeeded.
    pub bler_private: Estimate,
    pub bler_overall: Estimate,
    pub aaoi_common: Option<Estimate>,
    pub aaoi_overall: Estimate,
}

/// Retained instantaneous SINRs, indexed `[user][slot]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SinrSamples {
    pub common: Vec<Vec<f64>>,
    pub private: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStream {
    Common,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawTraceRow {
    pub slot: u64,
    pub user: usize,
    pub stream: TraceStream,
    pub sinr: f64,
    pub success: bool,
    /// Mean age of the slot for the stream's tracker (overall age for the private row).
    pub aoi_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub n_trials: usize,
    pub n_batches: usize,
    pub mode: SimMode,
    pub users: Vec<UserEstimates>,
    pub mean_aaoi_overall: Estimate,
    pub mean_aaoi_common: Option<Estimate>,
    pub max_aaoi_overall: Estimate,
    pub sinr_samples: Option<SinrSamples>,
    /// Channel redraws caused by near-singular CSIT.
    pub resample_count: u64,
    pub raw_trace: Vec<RawTraceRow>,
}

#[derive(Debug, Clone, Default)]
struct UserBatch {
    first: f64,
    second: f64,
    overall: f64,
    common_age: AgeSummary,
    overall_age: AgeSummary,
}

#[derive(Debug, Clone, Default)]
struct BatchStats {
    slots: usize,
    users: Vec<UserBatch>,
    samples: SinrSamples,
    resamples: u64,
    raw: Vec<RawTraceRow>,
}

/// Simulates RSMA with the given allocation and split.
pub fn run_monte_carlo(cfg: &SystemConfig, alloc: &PowerAllocation, split: &RateSplit, options: &SimOptions) -> Result<SimResult> {
    let budget = validate_config(cfg)?;
    let scheme = RsmaScheme::new(cfg, &budget, alloc, split, options.common_precoder);
    simulate(cfg, &scheme, options)
}

/// Runs any [`SlotScheme`] over `cfg.n_trials` realizations.
pub fn simulate<S: SlotScheme>(cfg: &SystemConfig, scheme: &S, options: &SimOptions) -> Result<SimResult> {
    let budget = validate_config(cfg)?;
    if scheme.n_users() != cfg.n_users {
        return Err(Error::InvalidArgument(format!(
            "scheme serves {} users but the configuration has {}",
            scheme.n_users(),
            cfg.n_users
        )));
    }
    let n_batches = cfg.n_trials.div_ceil(cfg.batch_slots);
    let run = |b: usize| {
        let len = cfg.batch_slots.min(cfg.n_trials - b * cfg.batch_slots);
        run_batch(cfg, budget.rho, scheme, options, b, len)
    };
    let batches = map_batches(n_batches, options.workers, run)?;
    Ok(reduce(cfg, scheme.has_first_stage(), options, batches))
}

fn map_batches<F>(n: usize, workers: usize, f: F) -> Result<Vec<BatchStats>>
where
    F: Fn(usize) -> Result<BatchStats> + Sync,
{
    #[cfg(feature = "parallel")]
    if workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
        return pool.install(|| (0..n).into_par_iter().map(&f).collect());
    }
    let _ = workers;
    (0..n).map(f).collect()
}

/// Channel and decoding-outcome generators of trajectory `index`.
///
/// Outcomes draw from their own stream so every scheme and mode sees the same
/// channel sequence for a given seed.
pub fn trajectory_rngs(seed: u64, index: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let stream = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        rng
    };
    (stream(2 * index as u64), stream(2 * index as u64 + 1))
}

fn run_batch<S: SlotScheme>(
    cfg: &SystemConfig,
    rho: f64,
    scheme: &S,
    options: &SimOptions,
    index: usize,
    len: usize,
) -> Result<BatchStats> {
    let k = cfg.n_users;
    let t = cfg.slot_duration_s;
    let warmup = options.warmup_slots;
    let (mut rng, mut coin) = trajectory_rngs(cfg.rng_seed, index);
    let mut state = ChannelState::initial(k, cfg.n_antennas, &mut rng);
    let mut common = vec![AgeTracker::new(t, warmup); k];
    let mut overall = vec![AgeTracker::new(t, warmup); k];
    let mut out = BatchStats { slots: len, users: vec![UserBatch::default(); k], ..Default::default() };
    if options.keep_sinr_samples {
        out.samples = SinrSamples { common: vec![Vec::with_capacity(len); k], private: vec![Vec::with_capacity(len); k] };
    }
    let mut decodes = vec![SlotDecode::default(); k];
    let draw_outcomes = options.mode == SimMode::SlotAoi;
    for slot in 0..warmup + len {
        state = evolve_channel(&state, rho, &mut rng);
        let mut attempts = 0;
        while let Err(e) = scheme.decode(&state, options.perfect_csit, &mut rng, &mut decodes) {
            match e {
                Error::SingularCsit { .. } if attempts < MAX_RESAMPLES => {
                    attempts += 1;
                    out.resamples += 1;
                    let fresh = ChannelState::initial(k, cfg.n_antennas, &mut rng);
                    state = ChannelState { slot_index: state.slot_index, ..fresh };
                }
                other => return Err(other),
            }
        }
        let measured = slot >= warmup;
        let record_raw = index == 0 && measured && slot - warmup < options.raw_trace_slots;
        for (u, d) in decodes.iter().enumerate() {
            let first_bler = d.first.map_or(0.0, |f| f.bler);
            if measured {
                let acc = &mut out.users[u];
                acc.first += first_bler;
                acc.second += d.second.bler;
                acc.overall += compose_overall(first_bler, d.second.bler);
                if options.keep_sinr_samples {
                    out.samples.common[u].push(d.first.map_or(f64::NAN, |f| f.sinr));
                    out.samples.private[u].push(d.second.sinr);
                }
            }
            if draw_outcomes {
                let first_ok = coin.random::<f64>() >= first_bler;
                let second_ok = first_ok && coin.random::<f64>() >= d.second.bler;
                let common_age = common[u].record(first_ok);
                let overall_age = overall[u].record(second_ok);
                if record_raw {
                    let slot_no = (slot - warmup) as u64 + 1;
                    if let Some(f) = d.first {
                        out.raw.push(RawTraceRow { slot: slot_no, user: u, stream: TraceStream::Common, sinr: f.sinr, success: first_ok, aoi_s: common_age });
                    }
                    out.raw.push(RawTraceRow { slot: slot_no, user: u, stream: TraceStream::Private, sinr: d.second.sinr, success: second_ok, aoi_s: overall_age });
                }
            }
        }
    }
    for u in 0..k {
        out.users[u].common_age = common[u].summary();
        out.users[u].overall_age = overall[u].summary();
    }
    Ok(out)
}

/// Ratio estimator `Σ num / Σ den` over trajectories with its linearized per-trajectory residuals.
struct Ratio {
    value: f64,
    residuals: Vec<f64>,
}

impl Ratio {
    fn new(num: &[f64], den: &[f64]) -> Self {
        let (sn, sd): (f64, f64) = (num.iter().sum(), den.iter().sum());
        let value = sn / sd;
        let mean_den = sd / den.len() as f64;
        let residuals = num.iter().zip(den).map(|(a, d)| (a - value * d) / mean_den).collect();
        Self { value, residuals }
    }

    fn scaled(&self, value: f64, slope: f64) -> Self {
        Self { value, residuals: self.residuals.iter().map(|r| r * slope).collect() }
    }

    fn halfwidth(residuals: &[f64]) -> f64 {
        let b = residuals.len();
        if b < 2 {
            return f64::NAN;
        }
        let ss: f64 = residuals.iter().map(|r| r * r).sum();
        Z95 * (ss / (b * (b - 1)) as f64).sqrt()
    }

    fn estimate(&self) -> Estimate {
        Estimate { value: self.value, ci_halfwidth: Self::halfwidth(&self.residuals) }
    }

    fn mean(parts: &[Ratio]) -> Estimate {
        let k = parts.len() as f64;
        let value = parts.iter().map(|p| p.value).sum::<f64>() / k;
        let residuals: Vec<f64> =
            (0..parts[0].residuals.len()).map(|b| parts.iter().map(|p| p.residuals[b]).sum::<f64>() / k).collect();
        Estimate { value, ci_halfwidth: Self::halfwidth(&residuals) }
    }
}

fn reduce(cfg: &SystemConfig, has_first: bool, options: &SimOptions, batches: Vec<BatchStats>) -> SimResult {
    let k = cfg.n_users;
    let t = cfg.slot_duration_s;
    let slots: Vec<f64> = batches.iter().map(|b| b.slots as f64).collect();
    let column = |f: &dyn Fn(&UserBatch) -> f64, u: usize| batches.iter().map(|b| f(&b.users[u])).collect::<Vec<f64>>();
    let mut users = Vec::with_capacity(k);
    let (mut common_ages, mut overall_ages) = (Vec::new(), Vec::new());
    for u in 0..k {
        let first = Ratio::new(&column(&|x| x.first, u), &slots);
        let second = Ratio::new(&column(&|x| x.second, u), &slots);
        let overall = Ratio::new(&column(&|x| x.overall, u), &slots);
        let (common_age, overall_age) = match options.mode {
            SimMode::AnalyticBlerCheck => (renewal_map(&first, t), renewal_map(&overall, t)),
            SimMode::SlotAoi => {
                let age = |s: &dyn Fn(&UserBatch) -> AgeSummary| {
                    let area = column(&|x| s(x).area, u);
                    let dur = column(&|x| s(x).slots as f64 * t, u);
                    Ratio::new(&area, &dur)
                };
                (age(&|x| x.common_age), age(&|x| x.overall_age))
            }
        };
        users.push(UserEstimates {
            bler_common: has_first.then(|| first.estimate()),
            bler_private: second.estimate(),
            bler_overall: overall.estimate(),
            aaoi_common: has_first.then(|| common_age.estimate()),
            aaoi_overall: overall_age.estimate(),
        });
        common_ages.push(common_age);
        overall_ages.push(overall_age);
    }
    let worst = (0..k).fold(0, |w, u| if overall_ages[u].value > overall_ages[w].value { u } else { w });
    let samples = options.keep_sinr_samples.then(|| {
        let mut all = SinrSamples { common: vec![Vec::new(); k], private: vec![Vec::new(); k] };
        for b in &batches {
            for u in 0..k {
                all.common[u].extend_from_slice(&b.samples.common[u]);
                all.private[u].extend_from_slice(&b.samples.private[u]);
            }
        }
        all
    });
    SimResult {
        n_trials: cfg.n_trials,
        n_batches: batches.len(),
        mode: options.mode,
        mean_aaoi_overall: Ratio::mean(&overall_ages),
        mean_aaoi_common: has_first.then(|| Ratio::mean(&common_ages)),
        max_aaoi_overall: overall_ages[worst].estimate(),
        users,
        sinr_samples: samples,
        resample_count: batches.iter().map(|b| b.resamples).sum(),
        raw_trace: batches.into_iter().next().map(|b| b.raw).unwrap_or_default(),
    }
}

/// Maps a mean error estimate through the renewal formula (delta method for the spread).
fn renewal_map(eps: &Ratio, t: f64) -> Ratio {
    match aaoi_from_error_prob(eps.value.min(1.0), t) {
        Ok(v) => eps.scaled(v, t / (1.0 - eps.value).powi(2)),
        Err(_) => eps.scaled(f64::INFINITY, 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_config;

    fn small(trials: usize) -> SystemConfig {
        SystemConfig { n_trials: trials, batch_slots: 500, ..Default::default() }
    }

    #[test]
    fn perfect_single_user_link_has_minimal_age() {
        let cfg = SystemConfig {
            n_users: 1,
            n_antennas: 2,
            velocity_mps: 0.0,
            tx_power_dbm: 80.0,
            multicast_fraction: 0.0,
            distances_m: vec![200.0],
            blocklength_private: vec![400],
            n_trials: 5000,
            batch_slots: 1000,
            ..Default::default()
        };
        let alloc = PowerAllocation::new(0.0, vec![1.0]).unwrap();
        let r = run_monte_carlo(&cfg, &alloc, &RateSplit::uniform(1, 0.0), &SimOptions::default()).unwrap();
        assert!(r.users[0].bler_overall.value < 1e-12);
        assert!((r.users[0].aaoi_overall.value / (1.5 * cfg.slot_duration_s) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_across_runs_and_workers() {
        let cfg = small(4000);
        let alloc = PowerAllocation::even(4, 0.4);
        let split = RateSplit::uniform(4, 0.1);
        let mut opts = SimOptions { keep_sinr_samples: true, raw_trace_slots: 5, ..Default::default() };
        let a = run_monte_carlo(&cfg, &alloc, &split, &opts).unwrap();
        let b = run_monte_carlo(&cfg, &alloc, &split, &opts).unwrap();
        assert_eq!(a, b);
        opts.workers = 3;
        let c = run_monte_carlo(&cfg, &alloc, &split, &opts).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.raw_trace.len(), 5 * 4 * 2);
        assert_eq!(a.sinr_samples.unwrap().private[0].len(), 4000);
    }

    #[test]
    fn halfwidths_shrink_with_trials() {
        let alloc = PowerAllocation::even(4, 0.4);
        let split = RateSplit::uniform(4, 0.1);
        let opts = SimOptions::default();
        let a = run_monte_carlo(&small(5000), &alloc, &split, &opts).unwrap();
        let b = run_monte_carlo(&small(20000), &alloc, &split, &opts).unwrap();
        let ratio = a.mean_aaoi_overall.ci_halfwidth / b.mean_aaoi_overall.ci_halfwidth;
        // four times the trials should halve the width; allow sampling noise of the width itself
        assert!(ratio > 1.4 && ratio < 2.8, "ratio {ratio}");
    }

    #[test]
    fn both_modes_agree_and_bler_is_the_sample_mean() {
        let cfg = small(20000);
        let alloc = PowerAllocation::even(4, 0.4);
        let split = RateSplit::uniform(4, 0.1);
        let base = SimOptions { keep_sinr_samples: true, ..Default::default() };
        let slot = run_monte_carlo(&cfg, &alloc, &split, &base).unwrap();
        let mean = run_monte_carlo(&cfg, &alloc, &split, &SimOptions { mode: SimMode::AnalyticBlerCheck, ..base.clone() }).unwrap();
        let codes = crate::bler::StreamCodes::from_split(&cfg, &split);
        let samples = slot.sinr_samples.as_ref().unwrap();
        for u in 0..4 {
            let direct: f64 = samples.common[u].iter().map(|&g| crate::bler::normal_approx_bler(g, codes.common)).sum::<f64>() / 20000.0;
            assert!((direct / slot.users[u].bler_common.unwrap().value - 1.0).abs() < 1e-12);
            assert_eq!(slot.users[u].bler_overall, mean.users[u].bler_overall);
            let (a, b) = (slot.users[u].aaoi_overall, mean.users[u].aaoi_overall);
            assert!((a.value - b.value).abs() < 2.0 * (a.ci_halfwidth + b.ci_halfwidth), "user {u}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn rejects_user_count_mismatch() {
        let cfg = small(100);
        let three = cfg.clone().with_users(3);
        let budget = validate_config(&three).unwrap();
        let scheme = RsmaScheme::new(&three, &budget, &PowerAllocation::even(3, 0.4), &RateSplit::uniform(3, 0.0), CommonPrecoderMode::Random);
        assert!(simulate(&cfg, &scheme, &SimOptions::default()).is_err());
    }
}
