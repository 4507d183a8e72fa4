//! Scenario configuration, link budget, channel evolution, precoding and
//! instantaneous SINRs.

mod bessel;
mod channel;
mod config;
mod precoder;
mod sinr;

pub use bessel::{bessel_j0, doppler_correlation};
pub use channel::{complex_gaussian, evolve_channel, gaussian_matrix, ChannelState};
pub use config::{validate_config, LinkBudget, PathLossModel, SystemConfig, SPEED_OF_LIGHT};
pub use precoder::{
    common_precoder, condition_number, principal_eigenvector, random_unit_vector, zf_precoders,
    CommonPrecoderMode, PrecoderSet, MAX_CSIT_CONDITION,
};
pub use sinr::{beam_gains, instantaneous_sinrs, PowerAllocation, RateSplit, StreamSinr};
