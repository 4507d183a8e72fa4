use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{LinkBudget, SystemConfig};
use super::precoder::PrecoderSet;
use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;

/// Power fractions of the common stream and each private stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub alpha_c: f64,
    pub alpha: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(alpha_c: f64, alpha: Vec<f64>) -> Result<Self> {
        let all_in_range =
            std::iter::once(alpha_c).chain(alpha.iter().copied()).all(|a| (0.0..=1.0).contains(&a));
        let total = alpha_c + alpha.iter().sum::<f64>();
        if !all_in_range || (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "power fractions must lie in [0,1] and sum to 1 (alpha_c = {alpha_c}, alpha = {alpha:?})"
            )));
        }
        Ok(Self { alpha_c, alpha })
    }

    /// `alpha_c` on the common stream, the rest split evenly across `k` private streams.
    pub fn even(k: usize, alpha_c: f64) -> Self {
        Self { alpha_c, alpha: vec![(1.0 - alpha_c) / k as f64; k] }
    }

    pub fn n_users(&self) -> usize {
        self.alpha.len()
    }

    pub fn private_total(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// Fraction of each user's unicast bits carried by the common stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSplit {
    pub psi: Vec<f64>,
}

impl RateSplit {
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        if psi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(format!("rate-split factors must lie in [0,1], got {psi:?}")));
        }
        Ok(Self { psi })
    }

    pub fn uniform(k: usize, psi: f64) -> Self {
        Self { psi: vec![psi; k] }
    }

    /// Bits of the common stream: multicast plus every user's split share.
    pub fn common_bits(&self, cfg: &SystemConfig) -> f64 {
        let k0 = cfg.multicast_fraction;
        let m0 = cfg.info_bits_total;
        k0 * m0 + (1.0 - k0) * m0 * self.psi.iter().sum::<f64>()
    }

    pub fn private_bits(&self, cfg: &SystemConfig, k: usize) -> f64 {
        (1.0 - cfg.multicast_fraction) * (1.0 - self.psi[k]) * cfg.info_bits_total
    }
}

/// Instantaneous SINRs of one user in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSinr {
    /// Common stream, all private streams treated as noise.
    pub common: f64,
    /// Own private stream after the common stream is cancelled.
    pub private: f64,
}

/// `|h_k^H p|^2` for every user (rows) and every precoder column.
pub fn beam_gains(h: &DMatrix<Complex64>, beams: &DMatrix<Complex64>) -> DMatrix<f64> {
    (h * beams).map(|z| z.norm_sqr())
}

pub fn instantaneous_sinrs(
    h_true: &DMatrix<Complex64>,
    precoders: &PrecoderSet,
    alloc: &PowerAllocation,
    budget: &LinkBudget,
) -> Vec<StreamSinr> {
    let private = beam_gains(h_true, &precoders.private);
    let common = (h_true * &precoders.common).map(|z| z.norm_sqr());
    (0..h_true.nrows())
        .map(|k| {
            let snr = budget.snr(k);
            let all: f64 = (0..alloc.n_users()).map(|j| alloc.alpha[j] * private[(k, j)]).sum();
            let own = alloc.alpha[k] * private[(k, k)];
            let others = (all - own).max(0.0);
            StreamSinr {
                common: snr * alloc.alpha_c * common[k] / (snr * all + 1.0),
                private: snr * own / (snr * others + 1.0),
            }
        })
        .collect()
}
