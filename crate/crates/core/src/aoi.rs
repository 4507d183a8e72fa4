//! Closed-form average age of information from average block error rates.

use serde::Serialize;

use crate::bler::{bler_set, BlerSet, StreamCodes};
use crate::error::{Error, Result};
use crate::model::{LinkBudget, PowerAllocation, RateSplit, SystemConfig};
use crate::stats::DerivedStats;

/// A long-run average age, or the marker for a stream that never decodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Age {
    Bounded(f64),
    Unbounded,
}

impl Age {
    pub fn value(self) -> Option<f64> {
        match self {
            Age::Bounded(v) => Some(v),
            Age::Unbounded => None,
        }
    }

    /// Seconds, with `f64::INFINITY` for the unbounded marker.
    pub fn seconds(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    pub fn is_bounded(self) -> bool {
        matches!(self, Age::Bounded(_))
    }

    pub fn mean(ages: &[Age]) -> Age {
        let mut sum = 0.0;
        for a in ages {
            match a {
                Age::Bounded(v) => sum += v,
                Age::Unbounded => return Age::Unbounded,
            }
        }
        Age::Bounded(sum / ages.len() as f64)
    }

    pub fn max(ages: &[Age]) -> Age {
        ages.iter().try_fold(f64::NEG_INFINITY, |m, a| a.value().map(|v| m.max(v))).map_or(Age::Unbounded, Age::Bounded)
    }
}

/// `T/2 + T/(1-ε)`: the AAoI of a slotted link where each update fails with probability `ε`.
pub fn aaoi_from_error_prob(eps: f64, slot_s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("error probability must lie in [0,1], got {eps}")));
    }
    if eps >= 1.0 {
        return Err(Error::DivergentAge(eps));
    }
    Ok(slot_s / 2.0 + slot_s / (1.0 - eps))
}

/// Same as [`aaoi_from_error_prob`] but maps divergence to [`Age::Unbounded`].
pub fn age_from_error_prob(eps: f64, slot_s: f64) -> Result<Age> {
    match aaoi_from_error_prob(eps, slot_s) {
        Ok(v) => Ok(Age::Bounded(v)),
        Err(Error::DivergentAge(_)) => Ok(Age::Unbounded),
        Err(e) => Err(e),
    }
}

/// Overall AAoI written directly from the two stream BLERs, `T/2 + T/((1-ε_c)(1-ε_p))`.
pub fn overall_aaoi_factored(eps_common: f64, eps_private: f64, slot_s: f64) -> Age {
    let success = (1.0 - eps_common) * (1.0 - eps_private);
    if success <= 0.0 {
        Age::Unbounded
    } else {
        Age::Bounded(slot_s / 2.0 + slot_s / success)
    }
}

/// Analytic per-user ages with their summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AaoiSet {
    pub aaoi_common: Vec<Age>,
    pub aaoi_overall: Vec<Age>,
    pub mean_overall: Age,
    pub mean_common: Age,
    pub max_overall: Age,
    pub bler: BlerSet,
}

pub fn analytic_aaoi(
    cfg: &SystemConfig,
    budget: &LinkBudget,
    stats: &DerivedStats,
    alloc: &PowerAllocation,
    split: &RateSplit,
) -> Result<AaoiSet> {
    let codes = StreamCodes::from_split(cfg, split);
    let bler = bler_set(stats, alloc, budget, &codes)?;
    aaoi_from_blers(bler, cfg.slot_duration_s)
}

/// Builds an [`AaoiSet`] from already computed BLERs.
pub fn aaoi_from_blers(bler: BlerSet, slot_s: f64) -> Result<AaoiSet> {
    let to_ages = |eps: &[f64]| eps.iter().map(|&e| age_from_error_prob(e, slot_s)).collect::<Result<Vec<_>>>();
    let aaoi_common = to_ages(&bler.eps_common)?;
    let aaoi_overall = to_ages(&bler.eps_overall)?;
    Ok(AaoiSet {
        mean_overall: Age::mean(&aaoi_overall),
        mean_common: Age::mean(&aaoi_common),
        max_overall: Age::max(&aaoi_overall),
        aaoi_common,
        aaoi_overall,
        bler,
    })
}
