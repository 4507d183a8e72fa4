use serde::{Deserialize, Serialize};

use super::bessel::doppler_correlation;
use crate::error::{ConfigError, Result};

/// Speed of light used for the Doppler frequency, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Large-scale path loss `PL = intercept - freq_slope*lg(f_GHz) - dist_slope*lg(d_m)` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossModel {
    pub intercept_db: f64,
    pub freq_slope_db: f64,
    pub dist_slope_db: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self { intercept_db: -32.4, freq_slope_db: 20.0, dist_slope_db: 31.9 }
    }
}

impl PathLossModel {
    /// Path loss in dB (negative) for a carrier in Hz and a distance in meters.
    pub fn loss_db(&self, carrier_hz: f64, distance_m: f64) -> f64 {
        self.intercept_db
            - self.freq_slope_db * (carrier_hz / 1e9).log10()
            - self.dist_slope_db * distance_m.log10()
    }

    /// Linear power attenuation `10^(PL/10)`.
    pub fn attenuation(&self, carrier_hz: f64, distance_m: f64) -> f64 {
        10f64.powf(self.loss_db(carrier_hz, distance_m) / 10.0)
    }
}

/// Scenario parameters. Every field has a JSON key; missing keys take the
/// default scenario value and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub n_antennas: usize,
    pub n_users: usize,
    pub tx_power_dbm: f64,
    pub noise_density_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub velocity_mps: f64,
    pub slot_duration_s: f64,
    pub info_bits_total: f64,
    pub multicast_fraction: f64,
    pub blocklength_common: usize,
    pub blocklength_private: Vec<usize>,
    pub distances_m: Vec<f64>,
    pub qos_lambda: f64,
    pub rng_seed: u64,
    /// Channel realizations (slots) per Monte Carlo run.
    pub n_trials: usize,
    /// Slots per independent trajectory; each trajectory has its own RNG stream.
    pub batch_slots: usize,
    pub path_loss: PathLossModel,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_antennas: 5,
            n_users: 4,
            tx_power_dbm: 35.0,
            noise_density_dbm_hz: -174.0,
            bandwidth_hz: 10e6,
            carrier_hz: 5.9e9,
            velocity_mps: 200.0 / 3.6,
            slot_duration_s: 0.24e-3,
            info_bits_total: 200.0,
            multicast_fraction: 0.3,
            blocklength_common: 400,
            blocklength_private: vec![400; 4],
            distances_m: vec![200.0, 250.0, 300.0, 350.0],
            qos_lambda: 0.8,
            rng_seed: 1,
            n_trials: 100_000,
            batch_slots: 1000,
            path_loss: PathLossModel::default(),
        }
    }
}

impl SystemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()).into())
    }

    /// Users spaced evenly over `[near, far]` meters.
    pub fn with_even_distances(mut self, near: f64, far: f64) -> Self {
        let k = self.n_users;
        self.distances_m = if k == 1 {
            vec![near]
        } else {
            (0..k).map(|i| near + (far - near) * i as f64 / (k - 1) as f64).collect()
        };
        self
    }

    /// Resizes the per-user vectors when changing `n_users`; blocklengths copy the common one.
    pub fn with_users(mut self, k: usize) -> Self {
        let (near, far) = (
            self.distances_m.iter().cloned().fold(f64::INFINITY, f64::min),
            self.distances_m.iter().cloned().fold(0.0, f64::max),
        );
        self.n_users = k;
        self.blocklength_private = vec![self.blocklength_common; k];
        self.with_even_distances(near, far)
    }

    /// Sets every blocklength (common and private) to `n`.
    pub fn with_blocklength(mut self, n: usize) -> Self {
        self.blocklength_common = n;
        self.blocklength_private = vec![n; self.n_users];
        self
    }

    pub fn velocity_kmh(&self) -> f64 {
        self.velocity_mps * 3.6
    }

    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_density_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }

    fn check(&self) -> std::result::Result<(), ConfigError> {
        let k = self.n_users;
        if k == 0 {
            return Err(ConfigError::NoUsers);
        }
        if self.n_antennas < k {
            return Err(ConfigError::TooFewAntennas { n_antennas: self.n_antennas, n_users: k });
        }
        if self.distances_m.len() != k {
            return Err(ConfigError::LengthMismatch {
                field: "distances_m",
                got: self.distances_m.len(),
                expected: k,
            });
        }
        if self.blocklength_private.len() != k {
            return Err(ConfigError::LengthMismatch {
                field: "blocklength_private",
                got: self.blocklength_private.len(),
                expected: k,
            });
        }
        if let Some((index, &value)) =
            self.distances_m.iter().enumerate().find(|(_, d)| !(**d > 0.0 && d.is_finite()))
        {
            return Err(ConfigError::NonPositiveDistance { index, value });
        }
        if !(self.qos_lambda > 0.0 && self.qos_lambda.is_finite()) {
            return Err(ConfigError::NonPositiveLambda(self.qos_lambda));
        }
        if !(self.slot_duration_s > 0.0 && self.slot_duration_s.is_finite()) {
            return Err(ConfigError::NonPositiveSlot(self.slot_duration_s));
        }
        if self.blocklength_common == 0 {
            return Err(ConfigError::ZeroBlocklength { stream: "common".into() });
        }
        if let Some(i) = self.blocklength_private.iter().position(|&n| n == 0) {
            return Err(ConfigError::ZeroBlocklength { stream: format!("private[{i}]") });
        }
        if !(0.0..=1.0).contains(&self.multicast_fraction) {
            return Err(ConfigError::MulticastFraction(self.multicast_fraction));
        }
        for (field, value) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_hz", self.carrier_hz),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::NonPositive { field, value });
            }
        }
        if !(self.info_bits_total >= 0.0 && self.info_bits_total.is_finite()) {
            return Err(ConfigError::NonPositive { field: "info_bits_total", value: self.info_bits_total });
        }
        if !(self.velocity_mps >= 0.0) {
            return Err(ConfigError::NegativeVelocity(self.velocity_mps));
        }
        if self.n_trials == 0 || self.batch_slots == 0 {
            return Err(ConfigError::NoTrials);
        }
        Ok(())
    }
}

/// Quantities derived once per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    /// Slot-to-slot channel correlation.
    pub rho: f64,
    /// Linear path-loss attenuation per user.
    pub xi: Vec<f64>,
    /// Transmit power normalized by the total noise power.
    pub p_n: f64,
}

impl LinkBudget {
    /// Effective SNR scale `P_n * xi_k` of user `k`.
    pub fn snr(&self, k: usize) -> f64 {
        self.p_n * self.xi[k]
    }
}

/// Checks the configuration and derives correlation, attenuation and normalized power.
pub fn validate_config(cfg: &SystemConfig) -> Result<LinkBudget> {
    cfg.check()?;
    let rho = doppler_correlation(cfg.velocity_mps, cfg.carrier_hz, cfg.slot_duration_s);
    let xi = cfg
        .distances_m
        .iter()
        .map(|&d| cfg.path_loss.attenuation(cfg.carrier_hz, d))
        .collect();
    let p_n = 10f64.powf((cfg.tx_power_dbm - cfg.noise_power_dbm()) / 10.0);
    Ok(LinkBudget { rho, xi, p_n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn zero_velocity_gives_unit_correlation() {
        let cfg = SystemConfig { velocity_mps: 0.0, ..Default::default() };
        assert_eq!(validate_config(&cfg).unwrap().rho, 1.0);
    }

    #[test]
    fn path_loss_reference_points() {
        let pl = PathLossModel::default();
        assert!((pl.loss_db(1e9, 1.0) + 32.4).abs() < 1e-12);
        assert!((pl.attenuation(1e9, 1.0) - 5.754399373371571e-4).abs() < 1e-15);
        // hand evaluation of -32.4 - 20 lg 5.9 - 31.9 lg 200
        assert!((pl.loss_db(5.9e9, 200.0) + 121.219897094524).abs() < 1e-9);
        assert!((pl.attenuation(5.9e9, 200.0) / 7.551101196831846e-13 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn attenuation_decreases_with_distance() {
        let pl = PathLossModel::default();
        let xs: Vec<f64> = (1..200).map(|d| pl.attenuation(5.9e9, d as f64 * 5.0)).collect();
        assert!(xs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn noise_power_includes_bandwidth() {
        let cfg = SystemConfig::default();
        assert!((cfg.noise_power_dbm() + 104.0).abs() < 1e-12);
        let b = validate_config(&cfg).unwrap();
        assert!((b.p_n / 7.943282347242815e13 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_configs_with_distinct_diagnostics() {
        let few = SystemConfig { n_antennas: 3, ..Default::default() };
        assert!(matches!(
            validate_config(&few),
            Err(Error::Config(ConfigError::TooFewAntennas { n_antennas: 3, n_users: 4 }))
        ));
        let mut bad_d = SystemConfig::default();
        bad_d.distances_m[2] = 0.0;
        assert!(matches!(
            validate_config(&bad_d),
            Err(Error::Config(ConfigError::NonPositiveDistance { index: 2, .. }))
        ));
        let bad_l = SystemConfig { qos_lambda: 0.0, ..Default::default() };
        assert!(matches!(validate_config(&bad_l), Err(Error::Config(ConfigError::NonPositiveLambda(_)))));
        let bad_t = SystemConfig { slot_duration_s: -1.0, ..Default::default() };
        assert!(matches!(validate_config(&bad_t), Err(Error::Config(ConfigError::NonPositiveSlot(_)))));
        let bad_k0 = SystemConfig { multicast_fraction: 1.5, ..Default::default() };
        assert!(matches!(validate_config(&bad_k0), Err(Error::Config(ConfigError::MulticastFraction(_)))));
        let zero_n = SystemConfig { blocklength_common: 0, ..Default::default() };
        assert!(matches!(validate_config(&zero_n), Err(Error::Config(ConfigError::ZeroBlocklength { .. }))));
    }

    #[test]
    fn json_rejects_unknown_keys_and_fills_defaults() {
        let cfg = SystemConfig::from_json(r#"{"tx_power_dbm": 30.0}"#).unwrap();
        assert_eq!(cfg.tx_power_dbm, 30.0);
        assert_eq!(cfg.n_antennas, 5);
        let err = SystemConfig::from_json(r#"{"tx_power": 30.0}"#).unwrap_err();
        assert!(matches!(err, Error::Config(ConfigError::Parse(_))));
        let full = serde_json::to_string(&SystemConfig::default()).unwrap();
        assert_eq!(SystemConfig::from_json(&full).unwrap(), SystemConfig::default());
    }
}
