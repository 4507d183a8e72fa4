//! Per-slot decoding models the Monte Carlo engine can drive.

use rand_chacha::ChaCha8Rng;

use crate::bler::{normal_approx_bler, StreamCodes};
use crate::error::Result;
use crate::model::{
    instantaneous_sinrs, ChannelState, CommonPrecoderMode, LinkBudget, PowerAllocation, PrecoderSet, RateSplit,
    SystemConfig,
};

/// SINR of one decoding attempt and its normal-approximation error probability.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageOutcome {
    pub sinr: f64,
    pub bler: f64,
}

/// Decoding chain of one user in one slot.
///
/// `first` is an optional prerequisite decode (the RSMA common stream, or the
/// far user's message for a NOMA near user); a failure there loses `second`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotDecode {
    pub first: Option<StageOutcome>,
    pub second: StageOutcome,
}

/// A transmission scheme evaluated on one channel realization.
pub trait SlotScheme: Sync {
    fn n_users(&self) -> usize;

    /// Whether the scheme has a stream every user decodes first.
    fn has_first_stage(&self) -> bool;

    /// Fills `out[k]` for every user given the true channel and its outdated CSIT.
    ///
    /// Errors only with [`Error::SingularCsit`](crate::Error::SingularCsit), in which case the
    /// caller redraws the channel.
    fn decode(&self, state: &ChannelState, csit_is_current: bool, rng: &mut ChaCha8Rng, out: &mut [SlotDecode]) -> Result<()>;
}

/// RSMA with one common stream and ZF private streams.
#[derive(Debug, Clone)]
pub struct RsmaScheme {
    pub alloc: PowerAllocation,
    pub codes: StreamCodes,
    pub budget: LinkBudget,
    pub precoder: CommonPrecoderMode,
}

impl RsmaScheme {
    pub fn new(
        cfg: &SystemConfig,
        budget: &LinkBudget,
        alloc: &PowerAllocation,
        split: &RateSplit,
        precoder: CommonPrecoderMode,
    ) -> Self {
        Self { alloc: alloc.clone(), codes: StreamCodes::from_split(cfg, split), budget: budget.clone(), precoder }
    }
}

impl SlotScheme for RsmaScheme {
    fn n_users(&self) -> usize {
        self.alloc.n_users()
    }

    fn has_first_stage(&self) -> bool {
        true
    }

    fn decode(&self, state: &ChannelState, csit_is_current: bool, rng: &mut ChaCha8Rng, out: &mut [SlotDecode]) -> Result<()> {
        let csit = if csit_is_current { &state.h_current } else { state.csit() };
        let precoders = PrecoderSet::build(csit, self.precoder, rng)?;
        let sinrs = instantaneous_sinrs(&state.h_current, &precoders, &self.alloc, &self.budget);
        for (k, (s, slot)) in sinrs.iter().zip(out.iter_mut()).enumerate() {
            slot.first = Some(StageOutcome { sinr: s.common, bler: normal_approx_bler(s.common, self.codes.common) });
            slot.second = StageOutcome { sinr: s.private, bler: normal_approx_bler(s.private, self.codes.private[k]) };
        }
        Ok(())
    }
}
