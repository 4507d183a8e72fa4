//! Slot-level age bookkeeping shared by the Monte Carlo engine and the
//! constant-error renewal oracle.

use rand::Rng;

use crate::error::{Error, Result};

/// Slots discarded at the start of every trajectory before ages are averaged.
pub const DEFAULT_WARMUP_SLOTS: usize = 100;

/// Accumulates the age area of one stream over a trajectory.
///
/// The age is `T` right after a successful slot and grows by `T` per failed
/// slot; the per-slot mean is the age at the slot start plus `T/2`. Averages
/// are taken over whole renewal intervals: from the first success at or after
/// the warm-up to the last success. A trajectory without any renewal falls
/// back to the plain average over all post-warm-up slots, which grows with
/// the horizon.
#[derive(Debug, Clone)]
pub struct AgeTracker {
    slot_s: f64,
    warmup: usize,
    slot: usize,
    age: f64,
    open: bool,
    pending_area: f64,
    pending_slots: usize,
    area: f64,
    slots: usize,
    renewals: usize,
    raw_area: f64,
    raw_slots: usize,
}

/// Area and slot count of the averaging window of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgeSummary {
    /// Integral of the age over the window, s².
    pub area: f64,
    pub slots: usize,
    pub renewals: usize,
}

impl AgeSummary {
    pub fn average(&self, slot_s: f64) -> f64 {
        self.area / (self.slots as f64 * slot_s)
    }
}

impl AgeTracker {
    pub fn new(slot_s: f64, warmup: usize) -> Self {
        Self {
            slot_s,
            warmup,
            slot: 0,
            age: slot_s,
            open: false,
            pending_area: 0.0,
            pending_slots: 0,
            area: 0.0,
            slots: 0,
            renewals: 0,
            raw_area: 0.0,
            raw_slots: 0,
        }
    }

    /// Records one slot and returns its mean age.
    pub fn record(&mut self, success: bool) -> f64 {
        let t = self.slot_s;
        let mean_age = self.age + 0.5 * t;
        let measured = self.slot >= self.warmup;
        if measured {
            self.raw_area += mean_age * t;
            self.raw_slots += 1;
        }
        if self.open {
            self.pending_area += mean_age * t;
            self.pending_slots += 1;
        }
        if success {
            if self.open {
                self.area += self.pending_area;
                self.slots += self.pending_slots;
                self.renewals += 1;
                self.pending_area = 0.0;
                self.pending_slots = 0;
            } else if measured {
                self.open = true;
            }
            self.age = t;
        } else {
            self.age += t;
        }
        self.slot += 1;
        mean_age
    }

    /// Whether the averaging window has opened.
    pub fn in_window(&self) -> bool {
        self.open
    }

    pub fn summary(&self) -> AgeSummary {
        if self.renewals == 0 {
            AgeSummary { area: self.raw_area, slots: self.raw_slots, renewals: 0 }
        } else {
            AgeSummary { area: self.area, slots: self.slots, renewals: self.renewals }
        }
    }
}

/// Per-slot failure probabilities for [`slot_aoi_trace`].
#[derive(Debug, Clone, PartialEq)]
pub enum FailureProbs {
    Constant(f64),
    PerSlot(Vec<f64>),
}

/// Full age trajectory of a single link.
#[derive(Debug, Clone, PartialEq)]
pub struct AoiTrace {
    pub slot_s: f64,
    /// Mean age of every slot, seconds.
    pub slot_aoi: Vec<f64>,
    /// Slot counts `W_j` between consecutive successes inside the window.
    pub success_gaps: Vec<u64>,
    /// `Q_j = T²(W_j²/2 + W_j)` for every renewal interval.
    pub area_terms: Vec<f64>,
    /// Index range `[start, end)` of `slot_aoi` the average is taken over.
    pub window: (usize, usize),
    pub time_average: f64,
}

impl AoiTrace {
    /// Time average of `slot_aoi` over the window.
    pub fn direct_average(&self) -> f64 {
        let (a, b) = self.window;
        self.slot_aoi[a..b].iter().sum::<f64>() / (b - a) as f64
    }

    /// Average rebuilt from the renewal areas, `Σ Q_j / (T Σ W_j)`.
    pub fn renewal_average(&self) -> Option<f64> {
        let slots: u64 = self.success_gaps.iter().sum();
        (slots > 0).then(|| self.area_terms.iter().sum::<f64>() / (self.slot_s * slots as f64))
    }
}

/// Simulates Bernoulli decoding outcomes slot by slot and records the age.
pub fn slot_aoi_trace<R: Rng + ?Sized>(
    failure: &FailureProbs,
    n_slots: usize,
    slot_s: f64,
    rng: &mut R,
) -> Result<AoiTrace> {
    trace_with_warmup(failure, n_slots, slot_s, DEFAULT_WARMUP_SLOTS, rng)
}

pub fn trace_with_warmup<R: Rng + ?Sized>(
    failure: &FailureProbs,
    n_slots: usize,
    slot_s: f64,
    warmup: usize,
    rng: &mut R,
) -> Result<AoiTrace> {
    if n_slots == 0 {
        return Err(Error::InvalidArgument("trace needs at least one slot".into()));
    }
    let prob = |i: usize| match failure {
        FailureProbs::Constant(p) => *p,
        FailureProbs::PerSlot(v) => v[i],
    };
    if let FailureProbs::PerSlot(v) = failure {
        if v.len() != n_slots {
            return Err(Error::InvalidArgument(format!("{} failure probabilities for {n_slots} slots", v.len())));
        }
    }
    let mut tracker = AgeTracker::new(slot_s, warmup);
    let mut slot_aoi = Vec::with_capacity(n_slots);
    let mut gaps = Vec::new();
    let (mut start, mut end, mut run) = (None, 0, 0u64);
    for i in 0..n_slots {
        let p = prob(i);
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("failure probability {p} at slot {i}")));
        }
        let was_open = tracker.in_window();
        let success = rng.random::<f64>() >= p;
        slot_aoi.push(tracker.record(success));
        if was_open {
            run += 1;
            if success {
                gaps.push(run);
                run = 0;
                end = i + 1;
            }
        } else if tracker.in_window() {
            start = Some(i + 1);
        }
    }
    let window = match start {
        Some(s) if end > s => (s, end),
        _ => (warmup.min(n_slots - 1), n_slots),
    };
    let t2 = slot_s * slot_s;
    let area_terms = gaps.iter().map(|&w| t2 * (0.5 * (w * w) as f64 + w as f64)).collect();
    let time_average = tracker.summary().average(slot_s);
    Ok(AoiTrace { slot_s, slot_aoi, success_gaps: gaps, area_terms, window, time_average })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const T: f64 = 0.24e-3;

    #[test]
    fn error_free_link_is_exactly_one_and_a_half_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tr = slot_aoi_trace(&FailureProbs::Constant(0.0), 5000, T, &mut rng).unwrap();
        assert!((tr.time_average / (1.5 * T) - 1.0).abs() < 1e-12);
        assert!(tr.success_gaps.iter().all(|&w| w == 1));
    }

    #[test]
    fn resets_to_one_slot_and_grows_by_one_slot() {
        let probs = vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tr = trace_with_warmup(&FailureProbs::PerSlot(probs), 6, T, 0, &mut rng).unwrap();
        let ages: Vec<f64> = tr.slot_aoi.iter().map(|a| a / T).collect();
        let expect = [1.5, 1.5, 2.5, 3.5, 1.5, 2.5];
        assert!(ages.iter().zip(expect).all(|(a, e)| (a - e).abs() < 1e-12));
        assert_eq!(tr.success_gaps, vec![3, 2]);
        assert_eq!(tr.window, (1, 6));
    }

    #[test]
    fn always_failing_link_diverges_with_horizon() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let short = slot_aoi_trace(&FailureProbs::Constant(1.0), 1_000, T, &mut rng).unwrap();
        let long = slot_aoi_trace(&FailureProbs::Constant(1.0), 10_000, T, &mut rng).unwrap();
        assert!(short.success_gaps.is_empty() && short.renewal_average().is_none());
        // the age ramps linearly so the average is about half the horizon
        assert!((long.time_average / (10_000.0 * T / 2.0) - 1.0).abs() < 0.05);
        assert!(long.time_average > 5.0 * short.time_average);
    }

    #[test]
    fn area_bookkeeping_paths_agree() {
        for &eps in &[0.05, 0.3, 0.7] {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let tr = slot_aoi_trace(&FailureProbs::Constant(eps), 20_000, T, &mut rng).unwrap();
            let direct = tr.direct_average();
            assert!((direct / tr.renewal_average().unwrap() - 1.0).abs() < 1e-9);
            assert!((direct / tr.time_average - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(slot_aoi_trace(&FailureProbs::Constant(0.1), 0, T, &mut rng).is_err());
        assert!(slot_aoi_trace(&FailureProbs::PerSlot(vec![0.1; 3]), 4, T, &mut rng).is_err());
        assert!(slot_aoi_trace(&FailureProbs::Constant(1.5), 4, T, &mut rng).is_err());
    }
}
