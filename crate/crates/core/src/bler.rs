//! Finite-blocklength error models: the normal approximation, its
//! piecewise-linear surrogate, and the closed-form average BLERs.

use std::f64::consts::{LOG2_E, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{LinkBudget, PowerAllocation, RateSplit, SystemConfig};
use crate::stats::{sinr_cdf, DerivedStats, Stream};

/// Information bits `m` sent over `n` channel uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodeParams {
    pub info_bits: f64,
    pub blocklength: usize,
}

impl CodeParams {
    pub fn new(info_bits: f64, blocklength: usize) -> Result<Self> {
        if blocklength == 0 || !(info_bits >= 0.0 && info_bits.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "code needs n >= 1 and finite m >= 0 (m = {info_bits}, n = {blocklength})"
            )));
        }
        Ok(Self { info_bits, blocklength })
    }

    pub fn rate(&self) -> f64 {
        self.info_bits / self.blocklength as f64
    }

    /// SINR at which the Shannon term equals the coding rate, `2^(m/n) - 1`.
    pub fn threshold(&self) -> f64 {
        self.rate().exp2() - 1.0
    }
}

/// Codes of one RSMA slot: the common stream and every private stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamCodes {
    pub common: CodeParams,
    pub private: Vec<CodeParams>,
}

impl StreamCodes {
    pub fn from_split(cfg: &SystemConfig, split: &RateSplit) -> Self {
        Self {
            common: CodeParams { info_bits: split.common_bits(cfg), blocklength: cfg.blocklength_common },
            private: (0..cfg.n_users)
                .map(|k| CodeParams { info_bits: split.private_bits(cfg, k), blocklength: cfg.blocklength_private[k] })
                .collect(),
        }
    }
}

/// Gaussian tail `Q(x) = erfc(x/√2)/2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Normal-approximation BLER at instantaneous SINR `gamma`.
///
/// At `gamma = 0` the dispersion vanishes; the limit is 1 for `m > 0` and 0 for `m = 0`.
pub fn normal_approx_bler(gamma: f64, code: CodeParams) -> f64 {
    if code.info_bits == 0.0 {
        return 0.0;
    }
    if gamma <= 0.0 {
        return 1.0;
    }
    let n = code.blocklength as f64;
    let capacity = gamma.ln_1p() * LOG2_E;
    let inv_sq = (1.0 + gamma).powi(-2);
    let dispersion = LOG2_E * (1.0 - inv_sq).sqrt();
    q_function(n.sqrt() * (capacity - code.rate()) / dispersion).clamp(0.0, 1.0)
}

/// Piecewise-linear surrogate: 1 below `mu`, 0 above `nu`, slope `-delta` between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearApprox {
    pub delta: f64,
    pub beta: f64,
    pub mu: f64,
    pub nu: f64,
}

impl LinearApprox {
    pub fn bler(&self, gamma: f64) -> f64 {
        if gamma <= self.mu {
            1.0
        } else if gamma >= self.nu {
            0.0
        } else {
            (0.5 - self.delta * (gamma - self.beta)).clamp(0.0, 1.0)
        }
    }
}

pub fn linear_approx_params(code: CodeParams) -> Result<LinearApprox> {
    if code.info_bits <= 0.0 {
        return Err(Error::InvalidArgument("linear approximation needs m > 0".into()));
    }
    let n = code.blocklength as f64;
    let rate = code.rate();
    let delta = (n / (2.0 * PI * ((2.0 * rate).exp2() - 1.0))).sqrt();
    let beta = rate.exp2() - 1.0;
    let half = 0.5 / delta;
    Ok(LinearApprox { delta, beta, mu: beta - half, nu: beta + half })
}

/// `δ ∫_μ^ν F(x) dx`, the exact average of the linear surrogate under `F`, by adaptive Simpson.
pub fn integrated_linear_bler<F: Fn(f64) -> f64>(cdf: F, approx: &LinearApprox, tol: f64) -> f64 {
    let lo = approx.mu.max(0.0);
    // below zero the CDF vanishes, so only [max(mu,0), nu] contributes
    if lo >= approx.nu {
        return 0.0;
    }
    approx.delta * adaptive_simpson(&cdf, lo, approx.nu, tol)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// Which decoding event an average BLER refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlerKind {
    Common,
    Private,
    /// Common failure, or common success followed by private failure.
    Overall,
}

/// `ε_c + (1 - ε_c) ε_p`: a common failure always loses the private message too.
pub fn compose_overall(eps_common: f64, eps_private: f64) -> f64 {
    (eps_common + (1.0 - eps_common) * eps_private).clamp(0.0, 1.0)
}

fn stream_bler(
    stream: Stream,
    k: usize,
    code: CodeParams,
    stats: &DerivedStats,
    alloc: &PowerAllocation,
    budget: &LinkBudget,
) -> Result<f64> {
    if code.info_bits == 0.0 {
        return Ok(0.0);
    }
    sinr_cdf(stream, k, stats, alloc, budget, code.threshold())
}

/// Closed-form average BLER of user `k` (midpoint evaluation of the linear surrogate).
pub fn average_bler(
    kind: BlerKind,
    k: usize,
    stats: &DerivedStats,
    alloc: &PowerAllocation,
    budget: &LinkBudget,
    codes: &StreamCodes,
) -> Result<f64> {
    let common = || stream_bler(Stream::Common, k, codes.common, stats, alloc, budget);
    let private = || stream_bler(Stream::Private, k, codes.private[k], stats, alloc, budget);
    match kind {
        BlerKind::Common => common(),
        BlerKind::Private => private(),
        BlerKind::Overall => Ok(compose_overall(common()?, private()?)),
    }
}

/// Average BLERs of every user and stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlerSet {
    pub eps_common: Vec<f64>,
    pub eps_private: Vec<f64>,
    pub eps_overall: Vec<f64>,
}

pub fn bler_set(
    stats: &DerivedStats,
    alloc: &PowerAllocation,
    budget: &LinkBudget,
    codes: &StreamCodes,
) -> Result<BlerSet> {
    let k = alloc.n_users();
    let mut out = BlerSet { eps_common: vec![0.0; k], eps_private: vec![0.0; k], eps_overall: vec![0.0; k] };
    for u in 0..k {
        let c = average_bler(BlerKind::Common, u, stats, alloc, budget, codes)?;
        let p = average_bler(BlerKind::Private, u, stats, alloc, budget, codes)?;
        out.eps_common[u] = c;
        out.eps_private[u] = p;
        out.eps_overall[u] = compose_overall(c, p);
    }
    Ok(out)
}
