//! Gamma moment matching and the closed-form approximate SINR CDFs.
//!
//! Every gain `|h_k^H p|^2` is modelled as a Gamma variable. Weighted sums of
//! such variables are collapsed into a single Gamma by matching the first two
//! moments, which yields CDFs of the common and private SINRs in closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{LinkBudget, PowerAllocation, SystemConfig};

/// `Gamma(shape, scale)` with density `x^(D-1) e^(-x/θ) / (Γ(D) θ^D)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite() {
            Ok(Self { shape, scale })
        } else {
            Err(Error::InvalidArgument(format!("gamma parameters must be positive, got ({shape}, {scale})")))
        }
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }
}

/// Collapses `Σ w_i A_i`, `A_i ~ Gamma(D_i, θ_i)`, into one Gamma with the same mean and variance.
pub fn moment_match_sum(components: &[(f64, GammaParams)]) -> Result<GammaParams> {
    if components.is_empty() {
        return Err(Error::InvalidArgument("moment matching needs at least one component".into()));
    }
    let (mut first, mut second) = (0.0, 0.0);
    for &(w, g) in components {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidArgument(format!("component weight must be positive, got {w}")));
        }
        GammaParams::new(g.shape, g.scale)?;
        let scale = w * g.scale;
        first += g.shape * scale;
        second += g.shape * scale * scale;
    }
    GammaParams::new(first * first / second, second / first)
}

/// Moment-matched parameters of every gain that enters the SINRs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedStats {
    /// Own private-stream gain `|h_k^H[m] p_k|^2` (same for every user).
    pub desired: GammaParams,
    /// Private-stream power seen while decoding the common stream, per user.
    /// `None` when that power is identically zero.
    pub common_interference: Vec<Option<GammaParams>>,
    /// Leakage of the other private streams onto user `k`'s private stream.
    /// `None` when there are no interferers (single user, perfect CSIT, or zero power).
    pub private_interference: Vec<Option<GammaParams>>,
}

impl DerivedStats {
    /// Mean of the desired gain, `D̃₁ θ̃₁ = (N_t-K+1)ρ² + 1 - ρ²`.
    pub fn desired_mean(&self) -> f64 {
        self.desired.mean()
    }
}

/// Degrees of freedom left to each zero-forcing beam.
pub fn zf_diversity(n_antennas: usize, n_users: usize) -> f64 {
    (n_antennas - n_users + 1) as f64
}

pub fn desired_gain_params(n_antennas: usize, n_users: usize, rho: f64) -> GammaParams {
    let dof = zf_diversity(n_antennas, n_users);
    let r2 = rho * rho;
    let num = dof * r2 + 1.0 - r2;
    let den = dof * r2 * r2 + (1.0 - r2) * (1.0 - r2);
    GammaParams { shape: num * num / den, scale: den / num }
}

/// Moment match of `Σ_j α_j |h_k^H p_j|^2` for user `k`.
pub fn common_interference_params(dof: f64, rho: f64, alpha: &[f64], k: usize) -> Option<GammaParams> {
    let r2 = rho * rho;
    let total: f64 = alpha.iter().sum();
    let squares: f64 = alpha.iter().map(|a| a * a).sum();
    let num = dof * r2 * alpha[k] + (1.0 - r2) * total;
    let den = dof * r2 * r2 * alpha[k] * alpha[k] + (1.0 - r2) * (1.0 - r2) * squares;
    (den > 0.0 && num > 0.0).then(|| GammaParams { shape: num * num / den, scale: den / num })
}

/// Moment match of `Σ_{j≠k} α_j |h_k^H p_j|^2` for user `k`.
pub fn private_interference_params(rho: f64, alpha: &[f64], k: usize) -> Option<GammaParams> {
    let r2 = rho * rho;
    let others: f64 = alpha.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, a)| a).sum();
    let squares: f64 = alpha.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, a)| a * a).sum();
    let scale = (1.0 - r2) * squares / others;
    (squares > 0.0 && scale > 0.0).then(|| GammaParams { shape: others * others / squares, scale })
}

pub fn gamma_approx_params(cfg: &SystemConfig, budget: &LinkBudget, alloc: &PowerAllocation) -> DerivedStats {
    let k = cfg.n_users;
    let dof = zf_diversity(cfg.n_antennas, k);
    let rho = budget.rho;
    DerivedStats {
        desired: desired_gain_params(cfg.n_antennas, k, rho),
        common_interference: (0..k).map(|u| common_interference_params(dof, rho, &alloc.alpha, u)).collect(),
        private_interference: (0..k).map(|u| private_interference_params(rho, &alloc.alpha, u)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Common,
    Private,
}

/// `1 - e^{-x/s} / (x θ/a + 1)^D`: the shared closed form of both CDFs.
fn ratio_cdf(x: f64, signal_scale: f64, interference: Option<GammaParams>, power: f64) -> f64 {
    let denominator = match interference {
        Some(g) => (g.scale / power * x + 1.0).powf(g.shape),
        None => 1.0,
    };
    1.0 - (-x / signal_scale).exp() / denominator
}

/// Approximate CDF of the common or private SINR of user `k` at `x`.
///
/// A stream with zero power has an SINR that is identically zero, so its CDF
/// is 1 everywhere on `x >= 0`.
pub fn sinr_cdf(
    stream: Stream,
    k: usize,
    stats: &DerivedStats,
    alloc: &PowerAllocation,
    budget: &LinkBudget,
    x: f64,
) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("SINR argument must be non-negative, got {x}")));
    }
    let snr = budget.snr(k);
    let value = match stream {
        Stream::Common => {
            let a = alloc.alpha_c;
            if a <= 0.0 {
                return Ok(1.0);
            }
            ratio_cdf(x, snr * a, stats.common_interference[k], a)
        }
        Stream::Private => {
            let a = stats.desired_mean() * alloc.alpha[k];
            if a <= 0.0 {
                return Ok(1.0);
            }
            ratio_cdf(x, snr * a, stats.private_interference[k], a)
        }
    };
    Ok(value.clamp(0.0, 1.0))
}
