//! The two SCA loops and the multi-start driver.

use std::io::Write;

use serde::Serialize;

use super::ipm::{solve_convex_subproblem, IpmOptions};
use super::surrogate::{surrogate_p2, surrogate_p4, QosParams, ScaIterate, ALPHA_FLOOR};
use crate::aoi::{analytic_aaoi, AaoiSet, Age};
use crate::error::{Error, Result};
use crate::model::{LinkBudget, PowerAllocation, RateSplit, SystemConfig};
use crate::stats::gamma_approx_params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaOptions {
    /// Stop when the objective moves by less than `tol_slots · T`.
    pub tol_slots: f64,
    pub max_iter: usize,
    /// Rounds of QoS restoration after step 2.
    pub restoration_rounds: usize,
    /// Common-stream power share of the step-1 starting allocation.
    pub start_alpha_c: f64,
    /// Run the starts on the rayon pool; results are identical either way.
    pub parallel: bool,
    /// Follow each step-1 surrogate step with a doubling search along its direction.
    pub extrapolate: bool,
    #[serde(skip)]
    pub ipm: IpmOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self { tol_slots: 1e-4, max_iter: 50, restoration_rounds: 10, start_alpha_c: 0.5, parallel: true, extrapolate: true, ipm: IpmOptions::default() }
    }
}

/// One SCA iterate: the true mean age (seconds) and a constraint measure.
///
/// For step 1 the measure is the largest surrogate constraint value at the
/// subproblem solution; for step 2 it is `max_k (Δ_c,k - λ Δ_k)` in seconds.
/// Both are clipped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective_s: f64,
    pub max_violation: f64,
}

/// Exact analytic ages at `(alloc, split)`.
pub fn evaluate_point(cfg: &SystemConfig, budget: &LinkBudget, alloc: &PowerAllocation, split: &RateSplit) -> Result<AaoiSet> {
    let stats = gamma_approx_params(cfg, budget, alloc);
    analytic_aaoi(cfg, budget, &stats, alloc, split)
}

fn mean_age(aaoi: &AaoiSet) -> f64 {
    aaoi.mean_overall.value().unwrap_or(f64::INFINITY)
}

/// Largest `Δ_c,k - λ Δ_k` over users in seconds (`+inf` if an age diverges).
pub fn qos_excess(aaoi: &AaoiSet, lambda: f64) -> f64 {
    aaoi.aaoi_common
        .iter()
        .zip(&aaoi.aaoi_overall)
        .map(|(c, o)| match (c, o) {
            (Age::Bounded(c), Age::Bounded(o)) => c - lambda * o,
            _ => f64::INFINITY,
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn normalized(x: &[f64]) -> PowerAllocation {
    let total: f64 = x.iter().sum();
    PowerAllocation { alpha_c: x[0] / total, alpha: x[1..].iter().map(|v| v / total).collect() }
}

/// Longest doubling of the step `from -> to` that keeps lowering the true objective.
///
/// The surrogate majorizes the objective, so its minimizer undershoots along a
/// descent direction; the search only ever accepts points better than `to`.
fn extrapolate(
    cfg: &SystemConfig,
    budget: &LinkBudget,
    split: &RateSplit,
    from: &PowerAllocation,
    to: PowerAllocation,
    f_to: f64,
) -> Result<(PowerAllocation, f64)> {
    let x0: Vec<f64> = std::iter::once(from.alpha_c).chain(from.alpha.iter().copied()).collect();
    let x1: Vec<f64> = std::iter::once(to.alpha_c).chain(to.alpha.iter().copied()).collect();
    let d: Vec<f64> = x1.iter().zip(&x0).map(|(a, b)| a - b).collect();
    let gamma_max = x0
        .iter()
        .zip(&d)
        .filter(|(_, di)| **di < 0.0)
        .map(|(xi, di)| (xi - ALPHA_FLOOR) / -di)
        .fold(MAX_EXTRAPOLATION, f64::min);
    let (mut best, mut f_best) = (to, f_to);
    let mut gamma = 2.0;
    while gamma <= gamma_max {
        let x: Vec<f64> = x0.iter().zip(&d).map(|(xi, di)| xi + gamma * di).collect();
        let cand = normalized(&x);
        let f = mean_age(&evaluate_point(cfg, budget, &cand, split)?);
        if !(f < f_best) {
            break;
        }
        (best, f_best) = (cand, f);
        gamma *= 2.0;
    }
    Ok((best, f_best))
}

const MAX_EXTRAPOLATION: f64 = 64.0;

/// Step 1: SCA on the power allocation with `split` fixed. Returns the best iterate and the trace.
pub fn optimize_power(
    cfg: &SystemConfig,
    budget: &LinkBudget,
    split: &RateSplit,
    start: &PowerAllocation,
    opts: &ScaOptions,
) -> Result<(PowerAllocation, Vec<TracePoint>)> {
    let k = cfg.n_users;
    let mut it = ScaIterate::consistent(cfg, budget, start, split)?;
    let mut f = mean_age(&evaluate_point(cfg, budget, start, split)?);
    if !f.is_finite() {
        return Err(Error::InvalidArgument("step-1 start has an unbounded age".into()));
    }
    let mut trace = vec![TracePoint { iteration: 0, objective_s: f, max_violation: 0.0 }];
    let mut best = (start.clone(), f);
    let mut cur = start.clone();
    for iter in 1..=opts.max_iter {
        let p = surrogate_p2(&it, cfg, budget)?;
        let sol = solve_convex_subproblem(&p, &it.p2_vector(), &opts.ipm)?;
        let alloc = normalized(&sol.x[..=k]);
        let f_sca = mean_age(&evaluate_point(cfg, budget, &alloc, split)?);
        let (alloc, f_new) = if opts.extrapolate { extrapolate(cfg, budget, split, &cur, alloc, f_sca)? } else { (alloc, f_sca) };
        trace.push(TracePoint { iteration: iter, objective_s: f_new, max_violation: p.max_violation(&sol.x).0.max(0.0) });
        it = ScaIterate::consistent(cfg, budget, &alloc, split)?;
        cur = alloc.clone();
        let moved = (f - f_new).abs();
        f = f_new;
        if f < best.1 {
            best = (alloc, f);
        }
        if moved < opts.tol_slots * cfg.slot_duration_s {
            break;
        }
    }
    Ok((best.0, trace))
}

/// Outcome of step 2 for one start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSplitOutcome {
    pub split: RateSplit,
    pub trace: Vec<TracePoint>,
    /// One trace per restoration round, empty when the first pass already met the QoS bound.
    pub restoration: Vec<Vec<TracePoint>>,
    pub qos_excess_s: f64,
    pub qos_satisfied: bool,
}

fn ratesplit_pass(
    cfg: &SystemConfig,
    budget: &LinkBudget,
    alloc: &PowerAllocation,
    start: &RateSplit,
    bounds: Option<&[f64]>,
    lambda: f64,
    opts: &ScaOptions,
) -> Result<(RateSplit, Vec<TracePoint>)> {
    let k = cfg.n_users;
    let mut it = ScaIterate::consistent(cfg, budget, alloc, start)?;
    let aaoi = evaluate_point(cfg, budget, alloc, start)?;
    let mut f = mean_age(&aaoi);
    let mut trace = vec![TracePoint { iteration: 0, objective_s: f, max_violation: qos_excess(&aaoi, lambda).max(0.0) }];
    for iter in 1..=opts.max_iter {
        let p = surrogate_p4(&it, cfg, budget, bounds)?;
        let sol = solve_convex_subproblem(&p, &it.p4_vector(), &opts.ipm)?;
        let split = RateSplit { psi: sol.x[..k].iter().map(|v| v.clamp(0.0, 1.0)).collect() };
        let aaoi = evaluate_point(cfg, budget, alloc, &split)?;
        let f_new = mean_age(&aaoi);
        trace.push(TracePoint { iteration: iter, objective_s: f_new, max_violation: qos_excess(&aaoi, lambda).max(0.0) });
        it = ScaIterate::consistent(cfg, budget, alloc, &split)?;
        let moved = (f - f_new).abs();
        f = f_new;
        if moved < opts.tol_slots * cfg.slot_duration_s {
            break;
        }
    }
    Ok((it.split(), trace))
}

/// Step 2: SCA on the rate split with `alloc` fixed, under the relaxed QoS rows.
///
/// The relaxed rows drop the offset `(λ-1)/2`, so a converged point is checked
/// against `Δ_c,k <= λ Δ_k`. When it fails, the pass is repeated with each bound
/// tightened to `λ + (λ-1)/(2 h_k)` (the exact condition at the current `h_k`).
pub fn optimize_ratesplit(
    cfg: &SystemConfig,
    budget: &LinkBudget,
    alloc: &PowerAllocation,
    start: &RateSplit,
    qos: Option<QosParams>,
    opts: &ScaOptions,
) -> Result<RateSplitOutcome> {
    let k = cfg.n_users;
    let Some(qos) = qos else {
        let (split, trace) = ratesplit_pass(cfg, budget, alloc, start, None, f64::INFINITY, opts)?;
        return Ok(RateSplitOutcome { split, trace, restoration: Vec::new(), qos_excess_s: f64::NEG_INFINITY, qos_satisfied: true });
    };
    let lambda = qos.lambda;
    let mut bounds = vec![lambda; k];
    let (mut split, trace) = ratesplit_pass(cfg, budget, alloc, start, Some(&bounds), lambda, opts)?;
    let mut restoration = Vec::new();
    let t_slot = cfg.slot_duration_s;
    let mut aaoi = evaluate_point(cfg, budget, alloc, &split)?;
    let mut excess = qos_excess(&aaoi, lambda);
    while excess > qos.tolerance_s && restoration.len() < opts.restoration_rounds {
        for (u, bound) in bounds.iter_mut().enumerate() {
            let Some(age) = aaoi.aaoi_overall[u].value() else {
                return Err(Error::InvalidArgument(format!("user {u} has an unbounded age during restoration")));
            };
            let h = age / t_slot - 0.5;
            *bound = bound.min(lambda + (lambda - 1.0) / (2.0 * h));
        }
        if let Some(u) = bounds.iter().position(|&b| !(b > 0.0)) {
            return Err(Error::InvalidArgument(format!("QoS bound of user {u} cannot be met at this power allocation")));
        }
        let (next, round) = ratesplit_pass(cfg, budget, alloc, &split, Some(&bounds), lambda, opts)?;
        split = next;
        restoration.push(round);
        aaoi = evaluate_point(cfg, budget, alloc, &split)?;
        excess = qos_excess(&aaoi, lambda);
    }
    Ok(RateSplitOutcome { split, trace, restoration, qos_excess_s: excess, qos_satisfied: excess <= qos.tolerance_s })
}

/// The result of one start of the two-step algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartOutcome {
    pub alloc: PowerAllocation,
    pub split: RateSplit,
    pub objective_s: f64,
    pub qos_satisfied: bool,
    pub qos_excess_s: f64,
    /// Fraction of private power moved to the common stream after step 2 missed the QoS bound.
    pub power_shift: f64,
    pub step1: Vec<TracePoint>,
    pub step2: Vec<TracePoint>,
    pub restoration: Vec<Vec<TracePoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartReport {
    pub index: usize,
    pub start: RateSplit,
    pub outcome: std::result::Result<StartOutcome, String>,
}

/// Output of [`multistart_optimize`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub alloc: PowerAllocation,
    pub split: RateSplit,
    /// Mean overall age in seconds.
    pub objective_s: f64,
    pub aaoi: AaoiSet,
    pub qos_satisfied: bool,
    pub selected_start: usize,
    pub starts: Vec<StartReport>,
}

/// Uniform starts `ψ ∈ {0, 0.1, 0.25, 0.5, 0.75}`, low values first.
pub fn default_starts(n_users: usize) -> Vec<RateSplit> {
    [0.0, 0.1, 0.25, 0.5, 0.75].iter().map(|&p| RateSplit::uniform(n_users, p)).collect()
}

/// Step 1 then step 2 from one rate-split start.
pub fn two_step(
    cfg: &SystemConfig,
    budget: &LinkBudget,
    qos: Option<QosParams>,
    start: &RateSplit,
    opts: &ScaOptions,
) -> Result<StartOutcome> {
    let alloc0 = PowerAllocation::even(cfg.n_users, opts.start_alpha_c);
    let (alloc, step1) = optimize_power(cfg, budget, start, &alloc0, opts)?;
    let mut rs = optimize_ratesplit(cfg, budget, &alloc, start, qos, opts)?;
    let mut alloc = alloc;
    let mut power_shift = 0.0;
    if let (false, Some(q)) = (rs.qos_satisfied, qos) {
        if let Some((t, a, r)) = shift_power_until_feasible(cfg, budget, &alloc, start, q, opts) {
            (power_shift, alloc, rs) = (t, a, r);
        }
    }
    let aaoi = evaluate_point(cfg, budget, &alloc, &rs.split)?;
    Ok(StartOutcome {
        objective_s: mean_age(&aaoi),
        alloc,
        split: rs.split,
        qos_satisfied: rs.qos_satisfied,
        qos_excess_s: rs.qos_excess_s,
        power_shift,
        step1,
        step2: rs.trace,
        restoration: rs.restoration,
    })
}

/// `(α_c + t(1-α_c), (1-t)α)`: moves a fraction `t` of the private power to the common stream.
fn shifted(alloc: &PowerAllocation, t: f64) -> PowerAllocation {
    PowerAllocation { alpha_c: alloc.alpha_c + t * (1.0 - alloc.alpha_c), alpha: alloc.alpha.iter().map(|a| a * (1.0 - t)).collect() }
}

const SHIFT_PROBES: [f64; 6] = [0.05, 0.1, 0.2, 0.4, 0.7, 0.9];
const SHIFT_BISECTIONS: usize = 12;

/// Fallback when step 2 cannot meet the QoS bound because the private streams are too
/// reliable for any split: a stronger common stream and weaker private streams both
/// lower `Δ_c,k / Δ_k`, so search for the smallest shift after which step 2 succeeds.
#[allow(clippy::type_complexity)]
fn shift_power_until_feasible(
    cfg: &SystemConfig,
    budget: &LinkBudget,
    alloc: &PowerAllocation,
    start: &RateSplit,
    qos: QosParams,
    opts: &ScaOptions,
) -> Option<(f64, PowerAllocation, RateSplitOutcome)> {
    let attempt = |t: f64| {
        let a = shifted(alloc, t);
        optimize_ratesplit(cfg, budget, &a, start, Some(qos), opts).ok().filter(|r| r.qos_satisfied).map(|r| (t, a, r))
    };
    let mut lo = 0.0;
    let mut found = None;
    for t in SHIFT_PROBES {
        if let Some(hit) = attempt(t) {
            found = Some(hit);
            break;
        }
        lo = t;
    }
    let mut found = found?;
    for _ in 0..SHIFT_BISECTIONS {
        let mid = 0.5 * (lo + found.0);
        match attempt(mid) {
            Some(hit) => found = hit,
            None => lo = mid,
        }
    }
    Some(found)
}

/// Runs [`two_step`] from every start and keeps the best start that meets the QoS bound.
/// Ties go to the lowest start index.
pub fn multistart_optimize(
    cfg: &SystemConfig,
    budget: &LinkBudget,
    qos: Option<QosParams>,
    starts: &[RateSplit],
    opts: &ScaOptions,
) -> Result<Solution> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("at least one starting split is required".into()));
    }
    let run = |(i, s): (usize, &RateSplit)| StartReport {
        index: i,
        start: s.clone(),
        outcome: two_step(cfg, budget, qos, s, opts).map_err(|e| e.to_string()),
    };
    let reports: Vec<StartReport> = run_starts(starts, opts.parallel, run);
    let mut best: Option<(usize, f64)> = None;
    for r in &reports {
        if let Ok(o) = &r.outcome {
            if o.qos_satisfied && o.objective_s.is_finite() && best.is_none_or(|(_, f)| o.objective_s < f) {
                best = Some((r.index, o.objective_s));
            }
        }
    }
    let Some((index, _)) = best else {
        let reasons = reports
            .iter()
            .map(|r| match &r.outcome {
                Ok(o) => format!("start {}: QoS bound exceeded by {:.3e} s", r.index, o.qos_excess_s),
                Err(e) => format!("start {}: {e}", r.index),
            })
            .collect();
        return Err(Error::AllStartsFailed(reasons));
    };
    let chosen = reports[index].outcome.as_ref().expect("selected start succeeded").clone();
    let aaoi = evaluate_point(cfg, budget, &chosen.alloc, &chosen.split)?;
    Ok(Solution {
        alloc: chosen.alloc,
        split: chosen.split,
        objective_s: chosen.objective_s,
        aaoi,
        qos_satisfied: chosen.qos_satisfied,
        selected_start: index,
        starts: reports,
    })
}

#[cfg(feature = "parallel")]
fn run_starts<F>(starts: &[RateSplit], parallel: bool, run: F) -> Vec<StartReport>
where
    F: Fn((usize, &RateSplit)) -> StartReport + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        starts.par_iter().enumerate().map(run).collect()
    } else {
        starts.iter().enumerate().map(run).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_starts<F>(starts: &[RateSplit], _parallel: bool, run: F) -> Vec<StartReport>
where
    F: Fn((usize, &RateSplit)) -> StartReport,
{
    starts.iter().enumerate().map(run).collect()
}

/// One row of the optimizer trace export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub start: usize,
    pub step: String,
    pub iteration: usize,
    pub objective: f64,
    pub max_constraint_violation: f64,
}

pub fn trace_rows(solution: &Solution) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for r in &solution.starts {
        let Ok(o) = &r.outcome else { continue };
        let mut push = |step: String, pts: &[TracePoint]| {
            rows.extend(pts.iter().map(|p| TraceRow {
                start: r.index,
                step: step.clone(),
                iteration: p.iteration,
                objective: p.objective_s,
                max_constraint_violation: p.max_violation,
            }))
        };
        push("1".into(), &o.step1);
        push("2".into(), &o.step2);
        for (i, round) in o.restoration.iter().enumerate() {
            push(format!("2-restore-{}", i + 1), round);
        }
    }
    rows
}

/// Writes the trace as CSV with header `start,step,iteration,objective,max_constraint_violation`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "start,step,iteration,objective,max_constraint_violation")?;
    for r in rows {
        writeln!(out, "{},{},{},{:e},{:e}", r.start, r.step, r.iteration, r.objective, r.max_constraint_violation)?;
    }
    Ok(())
}
