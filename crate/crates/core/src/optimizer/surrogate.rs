//! Convex surrogates of the power-allocation problem (step 1) and of the
//! rate-split problem (step 2), each tight at its expansion point.

use std::f64::consts::LN_2;

use serde::Serialize;

use super::convex::{Affine, ConvexFn, ConvexProblem, Objective};
use crate::error::{Error, Result};
use crate::model::{LinkBudget, PowerAllocation, RateSplit, SystemConfig};
use crate::stats::{desired_gain_params, zf_diversity};

/// Lower bound on every power fraction inside the surrogate problems.
pub const ALPHA_FLOOR: f64 = 1e-6;

/// Auxiliary variables of one user in step 1. The four private-interference
/// entries are zero when that interference vanishes (one user, or a static channel).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct UserAux {
    pub d2: f64,
    pub o2: f64,
    pub d3: f64,
    pub o3: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e: f64,
}

/// One point of the alternating optimization together with its auxiliaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaIterate {
    pub alpha_c: f64,
    pub alpha: Vec<f64>,
    pub psi: Vec<f64>,
    pub aux: Vec<UserAux>,
    pub beta_c: f64,
    pub beta: Vec<f64>,
}

/// Bound on the common-stream age relative to the overall age.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QosParams {
    pub lambda: f64,
    /// Allowed excess of `Δ_c,k - λ Δ_k`, in seconds.
    pub tolerance_s: f64,
}

impl QosParams {
    pub fn new(lambda: f64, tolerance_s: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(tolerance_s >= 0.0) {
            return Err(Error::InvalidArgument(format!("QoS needs lambda > 0 and tolerance >= 0, got {lambda}, {tolerance_s}")));
        }
        Ok(Self { lambda, tolerance_s })
    }

    /// `λ` from the configuration and a tolerance of `1e-6 T`.
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self { lambda: cfg.qos_lambda, tolerance_s: 1e-6 * cfg.slot_duration_s }
    }
}

/// Constants shared by both surrogates.
#[derive(Debug, Clone)]
struct Scenario {
    k: usize,
    dof: f64,
    r2: f64,
    /// `D̃1 θ̃1`.
    desired_mean: f64,
    snr: Vec<f64>,
    has_private_interference: bool,
}

impl Scenario {
    fn new(cfg: &SystemConfig, budget: &LinkBudget) -> Self {
        let k = cfg.n_users;
        let r2 = budget.rho * budget.rho;
        Self {
            k,
            dof: zf_diversity(cfg.n_antennas, k),
            r2,
            desired_mean: desired_gain_params(cfg.n_antennas, k, budget.rho).mean(),
            snr: (0..k).map(|u| budget.snr(u)).collect(),
            has_private_interference: k > 1 && r2 < 1.0,
        }
    }

    /// `N' ρ² α_k + (1-ρ²) Σ α_j` and `N' ρ⁴ α_k² + (1-ρ²)² Σ α_j²`.
    fn common_moments(&self, alpha: &[f64], k: usize) -> (f64, f64) {
        let total: f64 = alpha.iter().sum();
        let squares: f64 = alpha.iter().map(|a| a * a).sum();
        let num = self.dof * self.r2 * alpha[k] + (1.0 - self.r2) * total;
        let den = self.dof * self.r2 * self.r2 * alpha[k] * alpha[k] + (1.0 - self.r2).powi(2) * squares;
        (num, den)
    }

    /// `Σ_{j≠k} α_j` and `Σ_{j≠k} α_j²`.
    fn others(alpha: &[f64], k: usize) -> (f64, f64) {
        alpha.iter().enumerate().filter(|&(j, _)| j != k).fold((0.0, 0.0), |(s, q), (_, a)| (s + a, q + a * a))
    }

    fn consistent_aux(&self, alpha_c: f64, alpha: &[f64], k: usize) -> UserAux {
        let (num, den) = self.common_moments(alpha, k);
        let o2 = den / num;
        let mut aux = UserAux { d2: num * num / den, o2, a: den, c: o2 / alpha_c, ..Default::default() };
        if self.has_private_interference {
            let (sum, squares) = Self::others(alpha, k);
            let o3 = (1.0 - self.r2) * squares / sum;
            aux.d3 = sum * sum / squares;
            aux.o3 = o3;
            aux.b = squares;
            aux.e = o3 / alpha[k];
        }
        aux
    }
}

/// Thresholds `2^(m/n) - 1` of the common stream and of every private stream.
fn thresholds(cfg: &SystemConfig, psi: &[f64]) -> (f64, Vec<f64>) {
    let split = RateSplit { psi: psi.to_vec() };
    let common = (split.common_bits(cfg) / cfg.blocklength_common as f64).exp2() - 1.0;
    let private = (0..cfg.n_users)
        .map(|k| (split.private_bits(cfg, k) / cfg.blocklength_private[k] as f64).exp2() - 1.0)
        .collect();
    (common, private)
}

impl ScaIterate {
    /// The point `(α_c, α, ψ)` with every auxiliary at its defining value.
    pub fn consistent(cfg: &SystemConfig, budget: &LinkBudget, alloc: &PowerAllocation, split: &RateSplit) -> Result<Self> {
        let k = cfg.n_users;
        if alloc.n_users() != k || split.psi.len() != k {
            return Err(Error::InvalidArgument(format!(
                "allocation has {} users and split {} but n_users = {k}",
                alloc.n_users(),
                split.psi.len()
            )));
        }
        if alloc.alpha_c <= 0.0 || alloc.alpha.iter().any(|&a| a <= 0.0) {
            return Err(Error::InvalidArgument("surrogate expansion needs every power fraction positive".into()));
        }
        let sc = Scenario::new(cfg, budget);
        let aux = (0..k).map(|u| sc.consistent_aux(alloc.alpha_c, &alloc.alpha, u)).collect();
        let (beta_c, beta) = thresholds(cfg, &split.psi);
        Ok(Self { alpha_c: alloc.alpha_c, alpha: alloc.alpha.clone(), psi: split.psi.clone(), aux, beta_c, beta })
    }

    pub fn allocation(&self) -> PowerAllocation {
        PowerAllocation { alpha_c: self.alpha_c, alpha: self.alpha.clone() }
    }

    pub fn split(&self) -> RateSplit {
        RateSplit { psi: self.psi.clone() }
    }

    /// Step-1 variable vector `[α_c, α, (d2, o2, d3, o3, a, b, c, e) per user]`.
    pub fn p2_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(9 * self.alpha.len() + 1);
        x.push(self.alpha_c);
        x.extend(&self.alpha);
        for a in &self.aux {
            x.extend([a.d2, a.o2, a.d3, a.o3, a.a, a.b, a.c, a.e]);
        }
        x
    }

    /// Step-2 variable vector `[ψ, β_c, β]`.
    pub fn p4_vector(&self) -> Vec<f64> {
        let mut x = self.psi.clone();
        x.push(self.beta_c);
        x.extend(&self.beta);
        x
    }
}

/// Index layout of the step-1 variables.
#[derive(Debug, Clone, Copy)]
pub struct P2Layout {
    pub n_users: usize,
}

impl P2Layout {
    pub const ALPHA_C: usize = 0;

    pub fn n_vars(&self) -> usize {
        9 * self.n_users + 1
    }
    pub fn alpha(&self, k: usize) -> usize {
        1 + k
    }
    fn block(&self, k: usize) -> usize {
        1 + self.n_users + 8 * k
    }
    pub fn d2(&self, k: usize) -> usize {
        self.block(k)
    }
    pub fn o2(&self, k: usize) -> usize {
        self.block(k) + 1
    }
    pub fn d3(&self, k: usize) -> usize {
        self.block(k) + 2
    }
    pub fn o3(&self, k: usize) -> usize {
        self.block(k) + 3
    }
    pub fn a(&self, k: usize) -> usize {
        self.block(k) + 4
    }
    pub fn b(&self, k: usize) -> usize {
        self.block(k) + 5
    }
    pub fn c(&self, k: usize) -> usize {
        self.block(k) + 6
    }
    pub fn e(&self, k: usize) -> usize {
        self.block(k) + 7
    }
}

/// Index layout of the step-2 variables.
#[derive(Debug, Clone, Copy)]
pub struct P4Layout {
    pub n_users: usize,
}

impl P4Layout {
    pub fn n_vars(&self) -> usize {
        2 * self.n_users + 1
    }
    pub fn psi(&self, k: usize) -> usize {
        k
    }
    pub fn beta_c(&self) -> usize {
        self.n_users
    }
    pub fn beta(&self, k: usize) -> usize {
        self.n_users + 1 + k
    }
}

/// Adds the convex part `(x+y)²/2 ≥ tangent` lower bound: `-(x^t+y^t)(x+y) + (x^t+y^t)²/2`.
fn add_neg_sum_square_tangent(f: &mut ConvexFn, coef: f64, x: usize, xt: f64, y: usize, yt: f64) {
    let s = xt + yt;
    f.add_linear(x, -coef * s).add_linear(y, -coef * s).add_constant(coef * s * s / 2.0);
}

/// Adds `-coef (x²)` replaced by its tangent: `-coef (2 x^t x - (x^t)²)`.
fn add_neg_square_tangent(f: &mut ConvexFn, coef: f64, x: usize, xt: f64) {
    f.add_linear(x, -2.0 * coef * xt).add_constant(coef * xt * xt);
}

/// Convex surrogate of the step-1 problem at `it` with the rate split `it.psi` held fixed.
///
/// The objective is `mean_k exp(g̃_k)`, so the surrogate mean age is `T/2 + T·objective`.
pub fn surrogate_p2(it: &ScaIterate, cfg: &SystemConfig, budget: &LinkBudget) -> Result<ConvexProblem> {
    let sc = Scenario::new(cfg, budget);
    let k_users = sc.k;
    let lay = P2Layout { n_users: k_users };
    let ac = P2Layout::ALPHA_C;
    let (dof, r2) = (sc.dof, sc.r2);
    let (thr_c, thr_p) = thresholds(cfg, &it.psi);
    let mut terms = Vec::with_capacity(k_users);
    let mut cons: Vec<(String, ConvexFn)> = Vec::new();
    for k in 0..k_users {
        let t = it.aux[k];
        let ak = lay.alpha(k);
        let alpha_kt = it.alpha[k];

        // Common interference: shape d2 >= num²/a, a <= den.
        let num = Affine::new(vec![(ak, dof * r2), (ac, -(1.0 - r2))], 1.0 - r2);
        let mut f = ConvexFn::default();
        f.add_square(1.0, num)
            .add_square(0.5, Affine::var(lay.a(k)))
            .add_square(0.5, Affine::var(lay.d2(k)));
        add_neg_sum_square_tangent(&mut f, 1.0, lay.a(k), t.a, lay.d2(k), t.d2);
        cons.push((format!("common-shape[{k}]"), f));

        // Scale o2 >= den/num, written as den <= o2·num.
        let mut f = ConvexFn::default();
        f.add_square(dof * r2 * r2, Affine::var(ak));
        for j in 0..k_users {
            f.add_square((1.0 - r2).powi(2), Affine::var(lay.alpha(j)));
        }
        f.add_linear(lay.o2(k), -(1.0 - r2));
        f.add_square(dof * r2 / 2.0, Affine::var(ak)).add_square(dof * r2 / 2.0, Affine::var(lay.o2(k)));
        f.add_square((1.0 - r2) / 2.0, Affine::new(vec![(ac, 1.0), (lay.o2(k), 1.0)], 0.0));
        add_neg_sum_square_tangent(&mut f, dof * r2, ak, alpha_kt, lay.o2(k), t.o2);
        add_neg_square_tangent(&mut f, (1.0 - r2) / 2.0, ac, it.alpha_c);
        add_neg_square_tangent(&mut f, (1.0 - r2) / 2.0, lay.o2(k), t.o2);
        cons.push((format!("common-scale[{k}]"), f));

        let mut f = ConvexFn::affine(vec![(lay.a(k), 1.0)], 0.0);
        add_neg_square_tangent(&mut f, dof * r2 * r2, ak, alpha_kt);
        for j in 0..k_users {
            add_neg_square_tangent(&mut f, (1.0 - r2).powi(2), lay.alpha(j), it.alpha[j]);
        }
        cons.push((format!("common-moment[{k}]"), f));

        // c >= o2/α_c.
        let mut f = ConvexFn::affine(vec![(lay.o2(k), 1.0)], 0.0);
        f.add_square(0.5, Affine::var(ac)).add_square(0.5, Affine::var(lay.c(k)));
        add_neg_sum_square_tangent(&mut f, 1.0, ac, it.alpha_c, lay.c(k), t.c);
        cons.push((format!("common-ratio[{k}]"), f));

        if sc.has_private_interference {
            // Private interference: shape d3 >= (Σ_{j≠k} α_j)²/b, b <= Σ_{j≠k} α_j².
            let mut f = ConvexFn::default();
            f.add_square(1.0, Affine::new(vec![(ac, -1.0), (ak, -1.0)], 1.0))
                .add_square(0.5, Affine::var(lay.b(k)))
                .add_square(0.5, Affine::var(lay.d3(k)));
            add_neg_sum_square_tangent(&mut f, 1.0, lay.b(k), t.b, lay.d3(k), t.d3);
            cons.push((format!("private-shape[{k}]"), f));

            // Scale o3 >= (1-ρ²) Σ_{j≠k} α_j² / Σ_{j≠k} α_j.
            let mut f = ConvexFn::affine(vec![(lay.o3(k), -1.0)], 0.0);
            for j in (0..k_users).filter(|&j| j != k) {
                f.add_square(1.0 - r2, Affine::var(lay.alpha(j)));
            }
            f.add_square(0.5, Affine::new(vec![(ak, 1.0), (lay.o3(k), 1.0)], 0.0))
                .add_square(0.5, Affine::new(vec![(ac, 1.0), (lay.o3(k), 1.0)], 0.0));
            add_neg_square_tangent(&mut f, 0.5, ak, alpha_kt);
            add_neg_square_tangent(&mut f, 0.5, ac, it.alpha_c);
            add_neg_square_tangent(&mut f, 1.0, lay.o3(k), t.o3);
            cons.push((format!("private-scale[{k}]"), f));

            let mut f = ConvexFn::affine(vec![(lay.b(k), 1.0)], 0.0);
            for j in (0..k_users).filter(|&j| j != k) {
                add_neg_square_tangent(&mut f, 1.0, lay.alpha(j), it.alpha[j]);
            }
            cons.push((format!("private-moment[{k}]"), f));

            // e >= o3/α_k.
            let mut f = ConvexFn::affine(vec![(lay.o3(k), 1.0)], 0.0);
            f.add_square(0.5, Affine::var(ak)).add_square(0.5, Affine::var(lay.e(k)));
            add_neg_sum_square_tangent(&mut f, 1.0, ak, alpha_kt, lay.e(k), t.e);
            cons.push((format!("private-ratio[{k}]"), f));
        }

        // Upper bound of ln g_k: tangent of each log, then Young's inequality on the product.
        let s = sc.snr[k];
        let a_c = thr_c;
        let a_k = thr_p[k] / sc.desired_mean;
        let mut g = ConvexFn::default();
        if a_c > 0.0 {
            young_log_product(&mut g, a_c, lay.c(k), t.c, lay.d2(k), t.d2, "common")?;
            g.add_reciprocal(a_c / s, ac);
        }
        if a_k > 0.0 {
            if sc.has_private_interference {
                young_log_product(&mut g, a_k, lay.e(k), t.e, lay.d3(k), t.d3, "private")?;
            }
            g.add_reciprocal(a_k / s, ak);
        }
        terms.push(g);
    }

    let mut p = ConvexProblem::new(lay.n_vars(), Objective::MeanExp(terms));
    p.constraints = cons;
    let simplex: Vec<(usize, f64)> = (0..=k_users).map(|i| (i, 1.0)).collect();
    p.add_equality(&simplex, 1.0);
    p.lower_bound("alpha-floor[c]", ac, ALPHA_FLOOR);
    p.upper_bound("alpha-cap[c]", ac, 1.0);
    for k in 0..k_users {
        p.lower_bound(format!("alpha-floor[{k}]"), lay.alpha(k), ALPHA_FLOOR);
        p.upper_bound(format!("alpha-cap[{k}]"), lay.alpha(k), 1.0);
    }
    for k in 0..k_users {
        let mut vars = vec![("d2", lay.d2(k)), ("o2", lay.o2(k)), ("a", lay.a(k)), ("c", lay.c(k))];
        let pinned = [lay.d3(k), lay.o3(k), lay.b(k), lay.e(k)];
        if sc.has_private_interference {
            vars.extend([("d3", pinned[0]), ("o3", pinned[1]), ("b", pinned[2]), ("e", pinned[3])]);
        } else {
            for i in pinned {
                p.add_equality(&[(i, 1.0)], 0.0);
            }
        }
        // The bound chain behind every relaxation needs non-negative auxiliaries.
        for (name, i) in vars {
            p.lower_bound(format!("{name}-nonneg[{k}]"), i, 0.0);
        }
    }
    Ok(p)
}

/// `d ln(A x + 1) <= d ln(A x^t + 1) + A d (x - x^t)/(A x^t + 1)` with `x d` bounded by Young's inequality.
fn young_log_product(g: &mut ConvexFn, amp: f64, x: usize, xt: f64, d: usize, dt: f64, stream: &str) -> Result<()> {
    if !(xt > 0.0) || !(dt > 0.0) {
        return Err(Error::ZeroExpansion(format!("{stream} stream auxiliaries ({xt}, {dt})")));
    }
    let base = amp * xt + 1.0;
    let w = amp / (2.0 * base);
    g.add_linear(d, base.ln() - amp * xt / base)
        .add_square(w * dt / xt, Affine::var(x))
        .add_square(w * xt / dt, Affine::var(d));
    Ok(())
}

/// Constants of step 2 for user `k` at a fixed power allocation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct P4User {
    pub d2: f64,
    /// `θ̃2/α_c`.
    pub u: f64,
    pub d3: f64,
    /// `θ̃3/(D̃1 θ̃1 α_k)`; zero without private interference.
    pub w: f64,
    /// `1/(P_n ξ_k α_c)`.
    pub v_c: f64,
    /// `1/(P_n ξ_k D̃1 θ̃1 α_k)`.
    pub v_k: f64,
}

#[cfg(test)]
impl P4User {
    pub fn ln_h_common(&self, beta_c: f64) -> f64 {
        self.d2 * (self.u * beta_c).ln_1p() + self.v_c * beta_c
    }

    /// `ln` of the private-stream factor; `ln h_k = ln h_c,k + ln_private_factor`.
    pub fn ln_private_factor(&self, beta_k: f64) -> f64 {
        self.d3 * (self.w * beta_k).ln_1p() + self.v_k * beta_k
    }
}

pub(crate) fn p4_users(cfg: &SystemConfig, budget: &LinkBudget, alloc: &PowerAllocation) -> Vec<P4User> {
    let sc = Scenario::new(cfg, budget);
    (0..sc.k)
        .map(|k| {
            let aux = sc.consistent_aux(alloc.alpha_c, &alloc.alpha, k);
            let dm = sc.desired_mean * alloc.alpha[k];
            P4User {
                d2: aux.d2,
                u: aux.o2 / alloc.alpha_c,
                d3: aux.d3,
                w: aux.o3 / dm,
                v_c: 1.0 / (sc.snr[k] * alloc.alpha_c),
                v_k: 1.0 / (sc.snr[k] * dm),
            }
        })
        .collect()
}

/// Convex surrogate of the step-2 problem at `it` with the power allocation of `it` held fixed.
///
/// `qos` holds one bound per user on `h_c,k/h_k`; `None` drops the QoS rows.
pub fn surrogate_p4(it: &ScaIterate, cfg: &SystemConfig, budget: &LinkBudget, qos: Option<&[f64]>) -> Result<ConvexProblem> {
    let k_users = cfg.n_users;
    if !(cfg.info_bits_total > 0.0) {
        return Err(Error::InvalidArgument("rate splitting needs info_bits_total > 0".into()));
    }
    if let Some(l) = qos {
        if l.len() != k_users || l.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument(format!("need {k_users} positive QoS bounds, got {l:?}")));
        }
    }
    let lay = P4Layout { n_users: k_users };
    let users = p4_users(cfg, budget, &it.allocation());
    let (k0, m0) = (cfg.multicast_fraction, cfg.info_bits_total);
    let bc = lay.beta_c();
    let mut terms = Vec::with_capacity(k_users);
    for (k, us) in users.iter().enumerate() {
        let bk = lay.beta(k);
        let mut h = ConvexFn::default();
        let (bct, bkt) = (it.beta_c, it.beta[k]);
        h.add_constant(us.d2 * ((us.u * bct).ln_1p() - us.u * bct / (us.u * bct + 1.0)))
            .add_linear(bc, us.d2 * us.u / (us.u * bct + 1.0) + us.v_c);
        h.add_constant(us.d3 * ((us.w * bkt).ln_1p() - us.w * bkt / (us.w * bkt + 1.0)))
            .add_linear(bk, us.d3 * us.w / (us.w * bkt + 1.0) + us.v_k);
        terms.push(h);
    }
    let mut p = ConvexProblem::new(lay.n_vars(), Objective::MeanExp(terms));

    let mut f = ConvexFn::affine((0..k_users).map(|j| (lay.psi(j), 1.0 - k0)).collect(), k0);
    f.add_neg_log(cfg.blocklength_common as f64 / (m0 * LN_2), Affine::new(vec![(bc, 1.0)], 1.0));
    p.constrain("common-rate", f);
    for k in 0..k_users {
        let mut f = ConvexFn::affine(vec![(lay.psi(k), -(1.0 - k0))], 1.0 - k0);
        f.add_neg_log(cfg.blocklength_private[k] as f64 / (m0 * LN_2), Affine::new(vec![(lay.beta(k), 1.0)], 1.0));
        p.constrain(format!("private-rate[{k}]"), f);
    }
    if let Some(bounds) = qos {
        for (k, us) in users.iter().enumerate() {
            let mut f = ConvexFn::affine(vec![(lay.beta(k), -us.v_k)], -bounds[k].ln());
            if us.d3 > 0.0 && us.w > 0.0 {
                f.add_neg_log(us.d3, Affine::new(vec![(lay.beta(k), us.w)], 1.0));
            }
            p.constrain(format!("qos[{k}]"), f);
        }
    }
    for k in 0..k_users {
        p.lower_bound(format!("psi-floor[{k}]"), lay.psi(k), 0.0);
        p.upper_bound(format!("psi-cap[{k}]"), lay.psi(k), 1.0);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aoi::analytic_aaoi;
    use crate::model::validate_config;
    use crate::stats::gamma_approx_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (SystemConfig, LinkBudget) {
        let cfg = SystemConfig::default();
        let b = validate_config(&cfg).unwrap();
        (cfg, b)
    }

    fn point(alpha_c: f64, alpha: Vec<f64>, psi: f64, cfg: &SystemConfig, b: &LinkBudget) -> ScaIterate {
        let alloc = PowerAllocation::new(alpha_c, alpha).unwrap();
        ScaIterate::consistent(cfg, b, &alloc, &RateSplit::uniform(cfg.n_users, psi)).unwrap()
    }

    /// `ln g_k` evaluated from the auxiliaries directly (no relaxation).
    fn ln_g(x: &[f64], cfg: &SystemConfig, b: &LinkBudget, psi: &[f64], k: usize) -> f64 {
        let sc = Scenario::new(cfg, b);
        let lay = P2Layout { n_users: cfg.n_users };
        let (tc, tp) = thresholds(cfg, psi);
        let (a_c, a_k) = (tc, tp[k] / sc.desired_mean);
        let (ac, alk) = (x[0], x[lay.alpha(k)]);
        let mut v = x[lay.d2(k)] * (a_c * x[lay.o2(k)] / ac).ln_1p() + (a_c / ac + a_k / alk) / sc.snr[k];
        if sc.has_private_interference {
            v += x[lay.d3(k)] * (a_k * x[lay.o3(k)] / alk).ln_1p();
        }
        v
    }

    fn mean_age_over_t(cfg: &SystemConfig, b: &LinkBudget, alloc: &PowerAllocation, split: &RateSplit) -> f64 {
        let stats = gamma_approx_params(cfg, b, alloc);
        analytic_aaoi(cfg, b, &stats, alloc, split).unwrap().mean_overall.seconds() / cfg.slot_duration_s
    }

    #[test]
    fn dimensions_match_the_problem_sizes() {
        let (cfg, b) = setup();
        let it = point(0.6, vec![0.1; 4], 0.2, &cfg, &b);
        assert_eq!(surrogate_p2(&it, &cfg, &b).unwrap().n_vars, 9 * 4 + 1);
        assert_eq!(it.p2_vector().len(), 37);
        let lambdas = vec![0.8; 4];
        let p4 = surrogate_p4(&it, &cfg, &b, Some(&lambdas)).unwrap();
        assert_eq!(p4.n_vars, 2 * 4 + 1);
        let qos_rows = p4.constraints.iter().filter(|(l, _)| !l.starts_with("psi")).count();
        assert_eq!(qos_rows, 2 * 4 + 1);
    }

    #[test]
    fn p2_is_tight_at_the_expansion_point() {
        let (cfg, b) = setup();
        let it = point(0.55, vec![0.2, 0.1, 0.05, 0.1], 0.3, &cfg, &b);
        let p = surrogate_p2(&it, &cfg, &b).unwrap();
        let x = it.p2_vector();
        for (label, f) in &p.constraints {
            if label.contains("nonneg") || label.starts_with("alpha") {
                continue;
            }
            let v = f.value(&x).unwrap();
            assert!(v.abs() < 1e-9, "{label}: {v}");
        }
        let Objective::MeanExp(terms) = &p.objective else { panic!() };
        for (k, g) in terms.iter().enumerate() {
            let exact = ln_g(&x, &cfg, &b, &it.psi, k);
            assert!((g.value(&x).unwrap() - exact).abs() < 1e-9, "user {k}");
        }
        let surrogate_age = 0.5 + p.objective.value(&x).unwrap();
        assert!((surrogate_age - mean_age_over_t(&cfg, &b, &it.allocation(), &it.split())).abs() < 1e-9);
    }

    #[test]
    fn p2_majorizes_at_random_feasible_points() {
        use crate::optimizer::ipm::{solve_convex_subproblem, IpmOptions};
        let (cfg, b) = setup();
        let it = point(0.5, vec![0.125; 4], 0.2, &cfg, &b);
        let p = surrogate_p2(&it, &cfg, &b).unwrap();
        let x0 = it.p2_vector();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Boundary points of the feasible set in random directions; convex mixtures stay feasible.
        let mut anchors = vec![x0.clone()];
        for _ in 0..8 {
            let dir: Vec<(usize, f64)> = (0..p.n_vars).map(|i| (i, rng.random_range(-1.0..1.0))).collect();
            let mut q = ConvexProblem::new(p.n_vars, Objective::Plain(ConvexFn::affine(dir, 0.0)));
            q.constraints = p.constraints.clone();
            q.eq_matrix = p.eq_matrix.clone();
            q.eq_rhs = p.eq_rhs.clone();
            for (i, v) in x0.iter().enumerate() {
                q.upper_bound(format!("cap{i}"), i, 3.0 * v + 1.0);
            }
            let opts = IpmOptions { tol: 1e-7, ..Default::default() };
            anchors.push(solve_convex_subproblem(&q, &x0, &opts).unwrap().x);
        }
        let Objective::MeanExp(terms) = &p.objective else { panic!() };
        for _ in 0..100 {
            let w: Vec<f64> = anchors.iter().map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
            let total: f64 = w.iter().sum();
            let x: Vec<f64> = (0..p.n_vars).map(|i| anchors.iter().zip(&w).map(|(a, wi)| a[i] * wi).sum::<f64>() / total).collect();
            assert!(p.max_violation(&x).0 <= 1e-9);
            for (k, g) in terms.iter().enumerate() {
                assert!(g.value(&x).unwrap() >= ln_g(&x, &cfg, &b, &it.psi, k) - 1e-12);
            }
            let alpha_sum: f64 = x[1..5].iter().sum::<f64>() + x[0];
            let alloc = PowerAllocation { alpha_c: x[0] / alpha_sum, alpha: x[1..5].iter().map(|v| v / alpha_sum).collect() };
            let exact = mean_age_over_t(&cfg, &b, &alloc, &it.split());
            assert!(0.5 + p.objective.value(&x).unwrap() >= exact - 1e-9);
        }
    }

    #[test]
    fn two_user_solve_matches_a_dense_grid_on_the_surrogate() {
        use crate::error::{Error as E, SolverError};
        use crate::optimizer::ipm::{solve_convex_subproblem, IpmOptions};
        let cfg = SystemConfig::default().with_users(2);
        let b = validate_config(&cfg).unwrap();
        let it = point(0.5, vec![0.25; 2], 0.1, &cfg, &b);
        let p = surrogate_p2(&it, &cfg, &b).unwrap();
        let x0 = it.p2_vector();
        let opts = IpmOptions::default();
        let free = solve_convex_subproblem(&p, &x0, &opts).unwrap().objective;
        // Surrogate minimized over the auxiliaries with (α_c, α_1) pinned; α_2 follows from the simplex row.
        let pinned = |ac: f64, a1: f64| -> Option<f64> {
            let mut q = p.clone();
            q.add_equality(&[(0, 1.0)], ac);
            q.add_equality(&[(1, 1.0)], a1);
            match solve_convex_subproblem(&q, &x0, &opts) {
                Ok(s) => Some(s.objective),
                Err(SolverError::Infeasible { .. }) => None,
                Err(e) => panic!("{:?}", E::from(e)),
            }
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 1..50 {
            for j in 1..(50 - i) {
                let (ac, a1) = (i as f64 * 0.02, j as f64 * 0.02);
                if let Some(v) = pinned(ac, a1) {
                    if v < best.0 {
                        best = (v, ac, a1);
                    }
                }
            }
        }
        let (_, ac0, a10) = best;
        for i in -10..=10 {
            for j in -10..=10 {
                let (ac, a1) = (ac0 + i as f64 * 0.002, a10 + j as f64 * 0.002);
                if ac <= 0.0 || a1 <= 0.0 || ac + a1 >= 1.0 {
                    continue;
                }
                if let Some(v) = pinned(ac, a1) {
                    best.0 = best.0.min(v);
                }
            }
        }
        assert!(best.0.is_finite());
        assert!(free <= best.0 + 1e-9, "solver {free} above grid {}", best.0);
        assert!(best.0 - free < 1e-3, "solver {free} grid {}", best.0);
    }

    #[test]
    fn constraint_hessians_are_positive_semidefinite() {
        let (cfg, b) = setup();
        let it = point(0.5, vec![0.2, 0.1, 0.1, 0.1], 0.1, &cfg, &b);
        let p = surrogate_p2(&it, &cfg, &b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = p.n_vars;
        for _ in 0..20 {
            let x: Vec<f64> = it.p2_vector().iter().map(|v| v * rng.random_range(0.8..1.2)).collect();
            for (label, f) in &p.constraints {
                let h = 1e-4;
                let mut hess = nalgebra::DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let at = |di: f64, dj: f64| {
                            let mut y = x.clone();
                            y[i] += di;
                            y[j] += dj;
                            f.value(&y).unwrap()
                        };
                        hess[(i, j)] = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
                    }
                }
                let sym = (&hess + hess.transpose()) * 0.5;
                let min = sym.symmetric_eigenvalues().min();
                assert!(min >= -1e-6, "{label}: {min}");
            }
        }
    }

    #[test]
    fn zero_expansion_is_rejected() {
        let (cfg, b) = setup();
        let mut it = point(0.5, vec![0.125; 4], 0.2, &cfg, &b);
        it.aux[1].c = 0.0;
        assert!(matches!(surrogate_p2(&it, &cfg, &b), Err(Error::ZeroExpansion(_))));
    }

    #[test]
    fn single_user_drops_private_interference() {
        let cfg = SystemConfig::default().with_users(1);
        let b = validate_config(&cfg).unwrap();
        let it = point(0.5, vec![0.5], 0.0, &cfg, &b);
        let p = surrogate_p2(&it, &cfg, &b).unwrap();
        assert!(!p.constraints.iter().any(|(l, _)| l.starts_with("private")));
        assert_eq!(p.eq_matrix.nrows(), 5);
        let x = it.p2_vector();
        let exact = mean_age_over_t(&cfg, &b, &it.allocation(), &it.split());
        assert!((0.5 + p.objective.value(&x).unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn p4_is_tight_at_the_expansion_point() {
        let (cfg, b) = setup();
        let alloc = PowerAllocation::new(0.7, vec![0.1, 0.08, 0.06, 0.06]).unwrap();
        let split = RateSplit::new(vec![0.1, 0.2, 0.3, 0.0]).unwrap();
        let it = ScaIterate::consistent(&cfg, &b, &alloc, &split).unwrap();
        let p = surrogate_p4(&it, &cfg, &b, None).unwrap();
        let x = it.p4_vector();
        let users = p4_users(&cfg, &b, &alloc);
        let Objective::MeanExp(terms) = &p.objective else { panic!() };
        for (k, h) in terms.iter().enumerate() {
            let exact = users[k].ln_h_common(it.beta_c) + users[k].ln_private_factor(it.beta[k]);
            assert!((h.value(&x).unwrap() - exact).abs() < 1e-9);
        }
        assert!((0.5 + p.objective.value(&x).unwrap() - mean_age_over_t(&cfg, &b, &alloc, &split)).abs() < 1e-9);
        for (label, f) in &p.constraints {
            if label.contains("rate") {
                assert!(f.value(&x).unwrap().abs() < 1e-9, "{label}");
            }
        }
    }

    #[test]
    fn p4_majorizes_the_log_age() {
        let (cfg, b) = setup();
        let alloc = PowerAllocation::even(4, 0.6);
        let it = ScaIterate::consistent(&cfg, &b, &alloc, &RateSplit::uniform(4, 0.2)).unwrap();
        let p = surrogate_p4(&it, &cfg, &b, None).unwrap();
        let users = p4_users(&cfg, &b, &alloc);
        let Objective::MeanExp(terms) = &p.objective else { panic!() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let mut x = it.p4_vector();
            for v in x.iter_mut().skip(4) {
                *v *= rng.random_range(0.2..3.0);
            }
            for (k, h) in terms.iter().enumerate() {
                let exact = users[k].ln_h_common(x[4]) + users[k].ln_private_factor(x[5 + k]);
                assert!(h.value(&x).unwrap() >= exact - 1e-12);
            }
        }
    }

    #[test]
    fn zero_split_gives_direct_bit_counts() {
        let (cfg, b) = setup();
        let it = point(0.6, vec![0.1; 4], 0.0, &cfg, &b);
        let (k0, m0) = (cfg.multicast_fraction, cfg.info_bits_total);
        let expect_c = (k0 * m0 / cfg.blocklength_common as f64).exp2() - 1.0;
        let expect_k = ((1.0 - k0) * m0 / 400.0).exp2() - 1.0;
        assert!((it.beta_c - expect_c).abs() < 1e-15);
        assert!(it.beta.iter().all(|&v| (v - expect_k).abs() < 1e-15));
        let p = surrogate_p4(&it, &cfg, &b, None).unwrap();
        let x = it.p4_vector();
        for (label, f) in &p.constraints {
            if label.contains("rate") {
                assert!(f.value(&x).unwrap().abs() < 1e-12, "{label}");
            }
        }
    }

    #[test]
    fn relaxed_qos_contains_the_original() {
        // For λ <= 1 the original bound h_c <= λ h + (λ-1)/2 is the stricter one.
        let (cfg, b) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let lambda = rng.random_range(0.05..=1.0);
            let ac = rng.random_range(0.2..0.9);
            let alloc = PowerAllocation::even(4, ac);
            let psi: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            let split = RateSplit::new(psi).unwrap();
            let it = ScaIterate::consistent(&cfg, &b, &alloc, &split).unwrap();
            let users = p4_users(&cfg, &b, &alloc);
            let p = surrogate_p4(&it, &cfg, &b, Some(&[lambda; 4])).unwrap();
            let x = it.p4_vector();
            for (k, us) in users.iter().enumerate() {
                let hc = us.ln_h_common(it.beta_c).exp();
                let h = hc * us.ln_private_factor(it.beta[k]).exp();
                let original = hc <= lambda * h + (lambda - 1.0) / 2.0;
                let relaxed = p.constraints.iter().find(|(l, _)| *l == format!("qos[{k}]")).unwrap().1.value(&x).unwrap() <= 1e-12;
                assert!(!original || relaxed);
            }
        }
    }
}
