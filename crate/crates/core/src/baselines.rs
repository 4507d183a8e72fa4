//! SDMA and NOMA comparison schemes with exhaustive power-allocation search.
//!
//! Neither baseline has a shared stream, so every user receives its whole
//! `m0`-bit message (multicast part replicated) on its own code of length `n_k`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aoi::{age_from_error_prob, Age};
use crate::bler::{compose_overall, normal_approx_bler, CodeParams};
use crate::error::{Error, Result};
use crate::model::{
    complex_gaussian, condition_number, gaussian_matrix, principal_eigenvector, zf_precoders, ChannelState, LinkBudget,
    PowerAllocation, SystemConfig, MAX_CSIT_CONDITION,
};
use crate::simulator::{SlotDecode, SlotScheme, StageOutcome};
use crate::stats::{desired_gain_params, private_interference_params, sinr_cdf, DerivedStats, Stream};

/// Power grid resolution: fractions are multiples of `1/GRID_STEPS`.
pub const GRID_STEPS: usize = 100;

/// Channel draws behind the sample-average NOMA design.
pub const NOMA_DESIGN_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeTag {
    Rsma,
    Sdma,
    Noma,
}

impl SchemeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Rsma => "rsma",
            SchemeTag::Sdma => "sdma",
            SchemeTag::Noma => "noma",
        }
    }
}

impl std::str::FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rsma" => Ok(SchemeTag::Rsma),
            "sdma" => Ok(SchemeTag::Sdma),
            "noma" => Ok(SchemeTag::Noma),
            other => Err(Error::InvalidArgument(format!("unknown scheme `{other}` (expected rsma, sdma or noma)"))),
        }
    }
}

/// A NOMA pair: the nearer user performs SIC on the farther user's message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NomaGroup {
    pub near: usize,
    pub far: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub scheme: SchemeTag,
    /// Fraction of the transmit power on each user's message (sums to 1).
    pub best_allocation: Vec<f64>,
    /// NOMA pairing; `None` for SDMA.
    pub groups: Option<Vec<NomaGroup>>,
    pub aaoi: Vec<Age>,
    /// Per-user decoding failure probability behind `aaoi`.
    pub bler: Vec<f64>,
    pub mean_aaoi: Age,
    pub max_aaoi: Age,
    pub grid_points_evaluated: usize,
}

/// Every `parts`-tuple of non-negative integers summing to `total`, in lexicographic order.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=total {
            prefix.push(first);
            rec(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Maps `f` over `items` (in parallel when enabled) keeping input order.
fn ordered_map<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Index of the first strictly smallest value; `NaN` never wins.
fn first_argmin(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if v < best.map_or(f64::INFINITY, |b| b.1) {
            best = Some((i, v));
        }
    }
    best
}

fn full_message_code(cfg: &SystemConfig, k: usize) -> CodeParams {
    CodeParams { info_bits: cfg.info_bits_total, blocklength: cfg.blocklength_private[k] }
}

fn summarize(scheme: SchemeTag, alloc: Vec<f64>, groups: Option<Vec<NomaGroup>>, bler: Vec<f64>, cfg: &SystemConfig, points: usize) -> Result<BaselineResult> {
    let aaoi = bler.iter().map(|&e| age_from_error_prob(e, cfg.slot_duration_s)).collect::<Result<Vec<_>>>()?;
    Ok(BaselineResult {
        scheme,
        best_allocation: alloc,
        groups,
        mean_aaoi: Age::mean(&aaoi),
        max_aaoi: Age::max(&aaoi),
        aaoi,
        bler,
        grid_points_evaluated: points,
    })
}

/// Closed-form BLER of every SDMA user under ZF with outdated CSIT.
pub fn sdma_blers(cfg: &SystemConfig, budget: &LinkBudget, alpha: &[f64]) -> Result<Vec<f64>> {
    let k = cfg.n_users;
    if alpha.len() != k {
        return Err(Error::InvalidArgument(format!("{} power fractions for {k} users", alpha.len())));
    }
    let alloc = PowerAllocation { alpha_c: 0.0, alpha: alpha.to_vec() };
    let stats = DerivedStats {
        desired: desired_gain_params(cfg.n_antennas, k, budget.rho),
        common_interference: vec![None; k],
        private_interference: (0..k).map(|u| private_interference_params(budget.rho, alpha, u)).collect(),
    };
    (0..k)
        .map(|u| {
            let code = full_message_code(cfg, u);
            if code.info_bits == 0.0 {
                Ok(0.0)
            } else {
                sinr_cdf(Stream::Private, u, &stats, &alloc, budget, code.threshold())
            }
        })
        .collect()
}

fn mean_age_or_inf(bler: &[f64], slot_s: f64) -> f64 {
    let ages: Vec<Age> = bler.iter().map(|&e| age_from_error_prob(e, slot_s).unwrap_or(Age::Unbounded)).collect();
    Age::mean(&ages).seconds()
}

/// ZF SDMA: searches the power simplex on the 0.01 grid for the lowest mean analytic AAoI.
pub fn sdma_evaluate(cfg: &SystemConfig, budget: &LinkBudget) -> Result<BaselineResult> {
    let k = cfg.n_users;
    if cfg.n_antennas < k {
        return Err(Error::InvalidArgument(format!("SDMA needs n_antennas >= n_users ({} < {k})", cfg.n_antennas)));
    }
    let grid = compositions(GRID_STEPS, k);
    let step = 1.0 / GRID_STEPS as f64;
    let values = ordered_map(&grid, |c| {
        let alpha: Vec<f64> = c.iter().map(|&n| n as f64 * step).collect();
        sdma_blers(cfg, budget, &alpha).map_or(f64::INFINITY, |b| mean_age_or_inf(&b, cfg.slot_duration_s))
    });
    let (best, _) = first_argmin(values).unwrap_or((0, f64::INFINITY));
    let alpha: Vec<f64> = grid[best].iter().map(|&n| n as f64 * step).collect();
    let bler = sdma_blers(cfg, budget, &alpha)?;
    summarize(SchemeTag::Sdma, alpha, None, bler, cfg, grid.len())
}

/// Adjacent pairs after sorting by distance; the nearer user of each pair is `near`.
pub fn noma_groups(cfg: &SystemConfig) -> Result<Vec<NomaGroup>> {
    let k = cfg.n_users;
    if k % 2 != 0 {
        return Err(Error::InvalidArgument(format!("NOMA pairing needs an even number of users, got {k}")));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| cfg.distances_m[a].total_cmp(&cfg.distances_m[b]).then(a.cmp(&b)));
    Ok(order.chunks(2).map(|p| NomaGroup { near: p[0], far: p[1] }).collect())
}

/// One unit beam per group, orthogonal to the CSIT rows of every other group.
///
/// Inside that null space the beam is the dominant eigenvector of the group's
/// projected CSIT covariance.
pub fn block_zf_beams(csit: &DMatrix<Complex64>, groups: &[NomaGroup]) -> Result<DMatrix<Complex64>> {
    let nt = csit.ncols();
    let mut beams = DMatrix::zeros(nt, groups.len());
    for (g, grp) in groups.iter().enumerate() {
        let others: Vec<usize> = groups.iter().enumerate().filter(|&(h, _)| h != g).flat_map(|(_, o)| [o.near, o.far]).collect();
        let projector = if others.is_empty() {
            DMatrix::identity(nt, nt)
        } else {
            let o = csit.select_rows(&others);
            let condition = condition_number(&o);
            if !(condition <= MAX_CSIT_CONDITION) {
                return Err(Error::SingularCsit { condition });
            }
            let gram_inv = (&o * o.adjoint()).try_inverse().ok_or(Error::SingularCsit { condition })?;
            DMatrix::identity(nt, nt) - o.adjoint() * gram_inv * &o
        };
        let own = csit.select_rows(&[grp.near, grp.far]);
        let cov = &projector * own.adjoint() * &own * &projector;
        let beam: DVector<Complex64> = principal_eigenvector(cov);
        beams.set_column(g, &beam);
    }
    Ok(beams)
}

/// Power of the NOMA transmission: per-group share and the far user's share inside it.
#[derive(Debug, Clone, PartialEq)]
struct NomaPowers {
    group: Vec<f64>,
    far_share: Vec<f64>,
}

/// SINR stages of one user given beam gains `gains[g] = |h_u^H w_g|²` (true channel).
fn noma_stages(gains: &[f64], own_group: usize, is_near: bool, p: &NomaPowers, snr: f64) -> (Option<f64>, f64) {
    let pg = p.group[own_group];
    let f = p.far_share[own_group];
    let leak: f64 = gains.iter().enumerate().filter(|&(g, _)| g != own_group).map(|(g, &x)| p.group[g] * x).sum();
    let own = gains[own_group];
    let noise = 1.0 / snr;
    let far_msg = f * pg * own / ((1.0 - f) * pg * own + leak + noise);
    if is_near {
        (Some(far_msg), (1.0 - f) * pg * own / (leak + noise))
    } else {
        (None, far_msg)
    }
}

fn stage_failure(first: Option<f64>, second: f64, first_code: CodeParams, own_code: CodeParams) -> (Option<f64>, f64) {
    let q1 = first.map(|s| normal_approx_bler(s, first_code));
    (q1, normal_approx_bler(second, own_code))
}

/// True-channel beam gains of each user over a set of design channel draws.
struct DesignSet {
    /// `gains[s][u][g]`.
    gains: Vec<Vec<Vec<f64>>>,
}

impl DesignSet {
    fn draw<R: Rng + ?Sized>(cfg: &SystemConfig, rho: f64, groups: &[NomaGroup], samples: usize, rng: &mut R) -> Result<Self> {
        let (k, nt) = (cfg.n_users, cfg.n_antennas);
        let innovation = (1.0 - rho * rho).max(0.0).sqrt();
        let mut gains = Vec::with_capacity(samples);
        let mut redraws = 0;
        while gains.len() < samples {
            let csit = gaussian_matrix(k, nt, rng);
            let h = DMatrix::from_fn(k, nt, |i, j| csit[(i, j)] * rho + complex_gaussian(rng) * innovation);
            let beams = match block_zf_beams(&csit, groups) {
                Ok(b) => b,
                Err(Error::SingularCsit { .. }) if redraws < 1000 => {
                    redraws += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let g = (&h * &beams).map(|z| z.norm_sqr());
            gains.push((0..k).map(|u| g.row(u).iter().copied().collect()).collect());
        }
        Ok(Self { gains })
    }
}

/// Sample-average failure probabilities of one group's (near, far) users.
fn group_failures(cfg: &SystemConfig, budget: &LinkBudget, design: &DesignSet, g: usize, grp: NomaGroup, p: &NomaPowers) -> (f64, f64) {
    let far_code = full_message_code(cfg, grp.far);
    let near_code = full_message_code(cfg, grp.near);
    let (mut near, mut far) = (0.0, 0.0);
    for s in &design.gains {
        let (sic, own) = noma_stages(&s[grp.near], g, true, p, budget.snr(grp.near));
        let (q1, q2) = stage_failure(sic, own, far_code, near_code);
        near += compose_overall(q1.unwrap_or(0.0), q2);
        let (_, own) = noma_stages(&s[grp.far], g, false, p, budget.snr(grp.far));
        far += normal_approx_bler(own, far_code);
    }
    let n = design.gains.len() as f64;
    (near / n, far / n)
}

/// NOMA with [`NOMA_DESIGN_SAMPLES`] design draws; see [`noma_evaluate_with`].
pub fn noma_evaluate<R: Rng + ?Sized>(cfg: &SystemConfig, budget: &LinkBudget, rng: &mut R) -> Result<BaselineResult> {
    noma_evaluate_with(cfg, budget, NOMA_DESIGN_SAMPLES, rng)
}

/// Pairs users by proximity, separates pairs by block-ZF, superposes each pair
/// with one SIC layer and searches inter- and intra-group power on the 0.01 grid.
///
/// Failure probabilities are averages of the normal approximation over
/// `samples` outdated-CSIT channel draws. For a fixed inter-group split each
/// group's ages depend only on its own intra-group split, so the intra-group
/// search runs per group; this finds the same grid optimum as the full product.
pub fn noma_evaluate_with<R: Rng + ?Sized>(cfg: &SystemConfig, budget: &LinkBudget, samples: usize, rng: &mut R) -> Result<BaselineResult> {
    let groups = noma_groups(cfg)?;
    let n_groups = groups.len();
    let k = cfg.n_users;
    if cfg.n_antennas + 1 < k {
        return Err(Error::InvalidArgument(format!("block-ZF NOMA needs n_antennas >= n_users - 1 ({} < {})", cfg.n_antennas, k - 1)));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("NOMA design needs at least one channel sample".into()));
    }
    let design = DesignSet::draw(cfg, budget.rho, &groups, samples, rng)?;
    let step = 1.0 / GRID_STEPS as f64;
    let slot = cfg.slot_duration_s;
    let age = |e: f64| age_from_error_prob(e, slot).map_or(f64::INFINITY, |a| a.seconds());
    let inter = compositions(GRID_STEPS, n_groups);
    // For each inter-group split: best far share per group, its two failure probabilities, and the age sum.
    let evaluated = ordered_map(&inter, |c| {
        let group: Vec<f64> = c.iter().map(|&n| n as f64 * step).collect();
        let mut far_share = vec![0.5; n_groups];
        let mut fails = vec![(1.0, 1.0); n_groups];
        let mut total = 0.0;
        for (g, &grp) in groups.iter().enumerate() {
            let mut best = (f64::INFINITY, 0.5, (1.0, 1.0));
            for n in 0..=GRID_STEPS {
                let f = n as f64 * step;
                if group[g] == 0.0 || n == 0 || n == GRID_STEPS {
                    // A zero-power message never decodes.
                    continue;
                }
                let mut shares = far_share.clone();
                shares[g] = f;
                let p = NomaPowers { group: group.clone(), far_share: shares };
                let (near, far) = group_failures(cfg, budget, &design, g, grp, &p);
                let sum = age(near) + age(far);
                if sum < best.0 {
                    best = (sum, f, (near, far));
                }
            }
            far_share[g] = best.1;
            fails[g] = best.2;
            total += best.0;
        }
        (total, far_share, fails)
    });
    let points = inter.len() * n_groups * (GRID_STEPS + 1);
    let (best, _) = first_argmin(evaluated.iter().map(|e| e.0)).unwrap_or((0, f64::INFINITY));
    let group: Vec<f64> = inter[best].iter().map(|&n| n as f64 * step).collect();
    let (_, far_share, fails) = &evaluated[best];
    let mut alloc = vec![0.0; k];
    let mut bler = vec![1.0; k];
    for (g, grp) in groups.iter().enumerate() {
        alloc[grp.far] = group[g] * far_share[g];
        alloc[grp.near] = group[g] * (1.0 - far_share[g]);
        bler[grp.near] = fails[g].0;
        bler[grp.far] = fails[g].1;
    }
    summarize(SchemeTag::Noma, alloc, Some(groups), bler, cfg, points)
}

/// Per-slot ZF SDMA for the Monte Carlo engine.
#[derive(Debug, Clone)]
pub struct SdmaScheme {
    pub alpha: Vec<f64>,
    pub codes: Vec<CodeParams>,
    pub budget: LinkBudget,
}

impl SdmaScheme {
    pub fn new(cfg: &SystemConfig, budget: &LinkBudget, alpha: &[f64]) -> Self {
        Self {
            alpha: alpha.to_vec(),
            codes: (0..cfg.n_users).map(|k| full_message_code(cfg, k)).collect(),
            budget: budget.clone(),
        }
    }
}

impl SlotScheme for SdmaScheme {
    fn n_users(&self) -> usize {
        self.alpha.len()
    }

    fn has_first_stage(&self) -> bool {
        false
    }

    fn decode(&self, state: &ChannelState, csit_is_current: bool, _rng: &mut ChaCha8Rng, out: &mut [SlotDecode]) -> Result<()> {
        let csit = if csit_is_current { &state.h_current } else { state.csit() };
        let beams = zf_precoders(csit)?;
        let gains = (&state.h_current * &beams).map(|z| z.norm_sqr());
        for (k, slot) in out.iter_mut().enumerate() {
            let snr = self.budget.snr(k);
            let all: f64 = self.alpha.iter().enumerate().map(|(j, a)| a * gains[(k, j)]).sum();
            let own = self.alpha[k] * gains[(k, k)];
            let sinr = snr * own / (snr * (all - own).max(0.0) + 1.0);
            slot.first = None;
            slot.second = StageOutcome { sinr, bler: normal_approx_bler(sinr, self.codes[k]) };
        }
        Ok(())
    }
}

/// Per-slot block-ZF NOMA with one SIC layer for the Monte Carlo engine.
#[derive(Debug, Clone)]
pub struct NomaScheme {
    pub groups: Vec<NomaGroup>,
    /// Power fraction of each user's message, as in [`BaselineResult::best_allocation`].
    pub alloc: Vec<f64>,
    pub codes: Vec<CodeParams>,
    pub budget: LinkBudget,
}

impl NomaScheme {
    pub fn new(cfg: &SystemConfig, budget: &LinkBudget, groups: &[NomaGroup], alloc: &[f64]) -> Self {
        Self {
            groups: groups.to_vec(),
            alloc: alloc.to_vec(),
            codes: (0..cfg.n_users).map(|k| full_message_code(cfg, k)).collect(),
            budget: budget.clone(),
        }
    }

    fn powers(&self) -> NomaPowers {
        let group: Vec<f64> = self.groups.iter().map(|g| self.alloc[g.near] + self.alloc[g.far]).collect();
        let far_share = self
            .groups
            .iter()
            .zip(&group)
            .map(|(g, &pg)| if pg > 0.0 { self.alloc[g.far] / pg } else { 0.0 })
            .collect();
        NomaPowers { group, far_share }
    }
}

impl SlotScheme for NomaScheme {
    fn n_users(&self) -> usize {
        self.alloc.len()
    }

    fn has_first_stage(&self) -> bool {
        false
    }

    fn decode(&self, state: &ChannelState, csit_is_current: bool, _rng: &mut ChaCha8Rng, out: &mut [SlotDecode]) -> Result<()> {
        let csit = if csit_is_current { &state.h_current } else { state.csit() };
        let beams = block_zf_beams(csit, &self.groups)?;
        let gains = (&state.h_current * &beams).map(|z| z.norm_sqr());
        let p = self.powers();
        for (g, grp) in self.groups.iter().enumerate() {
            for (user, near) in [(grp.near, true), (grp.far, false)] {
                let row: Vec<f64> = gains.row(user).iter().copied().collect();
                let (first, second) = noma_stages(&row, g, near, &p, self.budget.snr(user));
                let (q1, q2) = stage_failure(first, second, self.codes[grp.far], self.codes[user]);
                out[user].first = first.zip(q1).map(|(sinr, bler)| StageOutcome { sinr, bler });
                out[user].second = StageOutcome { sinr: second, bler: q2 };
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_config;
    use crate::optimizer::{default_starts, multistart_optimize, QosParams, ScaOptions};
    use crate::simulator::{simulate, SimOptions};
    use rand::SeedableRng;

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(100, 1), vec![vec![100]]);
        assert_eq!(compositions(100, 2).len(), 101);
        assert_eq!(compositions(100, 4).len(), 176_851);
        assert!(compositions(5, 3).iter().all(|c| c.iter().sum::<usize>() == 5));
    }

    #[test]
    fn single_user_sdma_takes_all_power() {
        let cfg = SystemConfig::default().with_users(1);
        let b = validate_config(&cfg).unwrap();
        let r = sdma_evaluate(&cfg, &b).unwrap();
        assert_eq!(r.best_allocation, vec![1.0]);
        assert_eq!(r.grid_points_evaluated, 1);
    }

    #[test]
    fn sdma_is_symmetric_for_equal_distances() {
        let cfg = SystemConfig { distances_m: vec![275.0; 4], ..Default::default() };
        let b = validate_config(&cfg).unwrap();
        let r = sdma_evaluate(&cfg, &b).unwrap();
        let (lo, hi) = r.best_allocation.iter().fold((1.0f64, 0.0f64), |(l, h), &a| (l.min(a), h.max(a)));
        assert!(hi - lo <= 0.01 + 1e-12, "{:?}", r.best_allocation);
    }

    #[test]
    fn sdma_grid_optimum_beats_every_grid_point() {
        let cfg = SystemConfig::default().with_users(2);
        let b = validate_config(&cfg).unwrap();
        let r = sdma_evaluate(&cfg, &b).unwrap();
        let best = r.mean_aaoi.seconds();
        for c in compositions(100, 2) {
            let a: Vec<f64> = c.iter().map(|&n| n as f64 / 100.0).collect();
            let v = mean_age_or_inf(&sdma_blers(&cfg, &b, &a).unwrap(), cfg.slot_duration_s);
            assert!(best <= v);
        }
    }

    #[test]
    fn sdma_with_as_many_antennas_as_users_is_much_worse() {
        let base = SystemConfig::default();
        let tight = SystemConfig { n_antennas: 4, ..base.clone() };
        let wide = SystemConfig { n_antennas: 6, ..base };
        let a = sdma_evaluate(&tight, &validate_config(&tight).unwrap()).unwrap().mean_aaoi.seconds();
        let b = sdma_evaluate(&wide, &validate_config(&wide).unwrap()).unwrap().mean_aaoi.seconds();
        assert!(a > b);
    }

    #[test]
    fn pairs_adjacent_users_by_distance() {
        let cfg = SystemConfig { distances_m: vec![300.0, 200.0, 350.0, 250.0], ..Default::default() };
        let g = noma_groups(&cfg).unwrap();
        assert_eq!(g, vec![NomaGroup { near: 1, far: 3 }, NomaGroup { near: 0, far: 2 }]);
        let odd = SystemConfig::default().with_users(3);
        assert!(noma_groups(&odd).is_err());
    }

    #[test]
    fn block_zf_beams_null_the_other_group() {
        let cfg = SystemConfig::default();
        let groups = noma_groups(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = gaussian_matrix(4, 5, &mut rng);
        let w = block_zf_beams(&h, &groups).unwrap();
        let g = (&h * &w).map(|z| z.norm_sqr());
        assert!(g[(2, 0)] < 1e-20 && g[(3, 0)] < 1e-20 && g[(0, 1)] < 1e-20 && g[(1, 1)] < 1e-20);
        assert!(w.column_iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn all_power_on_the_far_user_starves_the_near_user() {
        let cfg = SystemConfig::default();
        let b = validate_config(&cfg).unwrap();
        let groups = noma_groups(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let design = DesignSet::draw(&cfg, b.rho, &groups, 50, &mut rng).unwrap();
        let p = NomaPowers { group: vec![0.5, 0.5], far_share: vec![1.0, 0.5] };
        let (near, _) = group_failures(&cfg, &b, &design, 0, groups[0], &p);
        assert_eq!(near, 1.0);
        assert_eq!(age_from_error_prob(near, cfg.slot_duration_s).unwrap(), Age::Unbounded);
    }

    #[test]
    fn baselines_trail_optimized_rsma_at_the_default_scenario() {
        let cfg = SystemConfig::default();
        let b = validate_config(&cfg).unwrap();
        let rsma = multistart_optimize(&cfg, &b, Some(QosParams::from_config(&cfg)), &default_starts(4), &ScaOptions::default()).unwrap();
        let sdma = sdma_evaluate(&cfg, &b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let noma = noma_evaluate(&cfg, &b, &mut rng).unwrap();
        assert!(rsma.objective_s <= sdma.mean_aaoi.seconds(), "{} vs {:?}", rsma.objective_s, sdma.mean_aaoi);
        assert!(rsma.objective_s <= noma.mean_aaoi.seconds(), "{} vs {:?}", rsma.objective_s, noma.mean_aaoi);
        let sum: f64 = noma.best_allocation.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slot_schemes_track_the_design_values() {
        let cfg = SystemConfig { n_trials: 20_000, ..Default::default() };
        let b = validate_config(&cfg).unwrap();
        let sdma = sdma_evaluate(&cfg, &b).unwrap();
        let sim = simulate(&cfg, &SdmaScheme::new(&cfg, &b, &sdma.best_allocation), &SimOptions::default()).unwrap();
        let rel = (sim.mean_aaoi_overall.value - sdma.mean_aaoi.seconds()).abs() / sdma.mean_aaoi.seconds();
        assert!(rel < 0.15, "sdma {rel}");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noma = noma_evaluate(&cfg, &b, &mut rng).unwrap();
        let scheme = NomaScheme::new(&cfg, &b, noma.groups.as_ref().unwrap(), &noma.best_allocation);
        let sim = simulate(&cfg, &scheme, &SimOptions::default()).unwrap();
        let rel = (sim.mean_aaoi_overall.value - noma.mean_aaoi.seconds()).abs() / noma.mean_aaoi.seconds();
        assert!(rel < 0.05, "noma {rel}");
    }
}
