//! mmWave link budget and the coverage / backhaul predicates built on it.
//!
//! All quantities are in dB / dBm except where a name says otherwise. The
//! budget assumes line of sight and free-space spreading; per-kilometre
//! atmospheric and rain attenuation are added linearly in distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Point;

/// Boltzmann noise floor at 290 K, dBm/Hz.
pub const NOISE_FLOOR_DBM_PER_HZ: f64 = -174.0;

/// Offset at which the default SNR thresholds are calibrated past the
/// nominal radius, so that `radius` is covered and `radius + 1` is not.
const CALIBRATION_MARGIN_M: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMode {
    Radius,
    Snr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub tx_gain_db: f64,
    pub rx_gain_db: f64,
    pub bandwidth_hz: f64,
    pub frequency_ghz: f64,
    pub atmospheric_atten_db_per_km: f64,
    pub rain_atten_db_per_km: f64,
    /// Access threshold used by [`covers`] in SNR mode.
    pub snr_threshold_db: f64,
    /// Backhaul threshold used by [`backhaul_reachable`] in SNR mode.
    pub backhaul_snr_threshold_db: f64,
    pub coverage_mode: CoverageMode,
    pub coverage_radius_m: f64,
    pub backhaul_radius_m: f64,
    /// When set, each backhaul link's assigned rate may not exceed its
    /// Shannon capacity.
    pub cap_backhaul_by_capacity: bool,
}

impl Default for RadioConfig {
    fn default() -> Self {
        let mut radio = Self {
            tx_power_dbm: 20.0,
            tx_gain_db: 20.0,
            rx_gain_db: 20.0,
            bandwidth_hz: 1e9,
            frequency_ghz: 60.0,
            atmospheric_atten_db_per_km: 15.0,
            rain_atten_db_per_km: 0.0,
            snr_threshold_db: 0.0,
            backhaul_snr_threshold_db: 0.0,
            coverage_mode: CoverageMode::Radius,
            coverage_radius_m: 200.0,
            backhaul_radius_m: 300.0,
            cap_backhaul_by_capacity: false,
        };
        radio.calibrate_thresholds();
        radio
    }
}

impl RadioConfig {
    /// Sets both SNR thresholds so that SNR mode reproduces the configured
    /// radii on the current link budget.
    pub fn calibrate_thresholds(&mut self) {
        self.snr_threshold_db = self.snr_at(self.coverage_radius_m + CALIBRATION_MARGIN_M);
        self.backhaul_snr_threshold_db = self.snr_at(self.backhaul_radius_m + CALIBRATION_MARGIN_M);
    }

    fn snr_at(&self, distance_m: f64) -> f64 {
        link_snr_db(distance_m, self).expect("calibration distance is positive")
    }

    pub fn validate(&self) -> Result<()> {
        if self.bandwidth_hz.is_nan() || self.bandwidth_hz <= 0.0 {
            return Err(Error::NonPositiveBandwidth(self.bandwidth_hz));
        }
        if !(self.coverage_radius_m > 0.0 && self.backhaul_radius_m > 0.0) {
            return Err(Error::Config("radii must be positive".into()));
        }
        if self.frequency_ghz.is_nan() || self.frequency_ghz <= 0.0 {
            return Err(Error::Config("frequency must be positive".into()));
        }
        if self.coverage_radius_m > self.backhaul_radius_m {
            log::warn!(
                "coverage radius {} m exceeds backhaul radius {} m",
                self.coverage_radius_m,
                self.backhaul_radius_m
            );
        }
        Ok(())
    }

    pub fn total_gain_db(&self) -> f64 {
        self.tx_gain_db + self.rx_gain_db
    }
}

pub fn thermal_noise_dbm(bandwidth_hz: f64) -> Result<f64> {
    if bandwidth_hz.is_nan() || bandwidth_hz <= 0.0 {
        return Err(Error::NonPositiveBandwidth(bandwidth_hz));
    }
    Ok(NOISE_FLOOR_DBM_PER_HZ + 10.0 * bandwidth_hz.log10())
}

/// Free-space path loss with distance in kilometres and frequency in GHz.
pub fn free_space_path_loss_db(distance_m: f64, frequency_ghz: f64) -> f64 {
    20.0 * (distance_m / 1000.0).log10() + 20.0 * frequency_ghz.log10() + 92.45
}

/// Total attenuation: free-space loss plus atmospheric and rain terms.
pub fn total_loss_db(distance_m: f64, radio: &RadioConfig) -> f64 {
    let km = distance_m / 1000.0;
    let rain = radio.rain_atten_db_per_km * km;
    let atmospheric = radio.atmospheric_atten_db_per_km * km;
    rain + atmospheric + free_space_path_loss_db(distance_m, radio.frequency_ghz)
}

/// Budget arithmetic: transmit power plus combined gain, minus total loss
/// and noise power.
pub fn budget_snr_db(
    tx_power_dbm: f64,
    total_gain_db: f64,
    total_loss_db: f64,
    noise_dbm: f64,
) -> f64 {
    tx_power_dbm + total_gain_db - total_loss_db - noise_dbm
}

pub fn link_snr_db(distance_m: f64, radio: &RadioConfig) -> Result<f64> {
    if distance_m.is_nan() || distance_m <= 0.0 {
        return Err(Error::ZeroDistance(distance_m));
    }
    let noise = thermal_noise_dbm(radio.bandwidth_hz)?;
    Ok(budget_snr_db(
        radio.tx_power_dbm,
        radio.total_gain_db(),
        total_loss_db(distance_m, radio),
        noise,
    ))
}

/// Shannon capacity `W log2(1 + snr)` in Gbps.
pub fn shannon_rate_gbps(snr_db: f64, bandwidth_hz: f64) -> f64 {
    debug_assert!(bandwidth_hz > 0.0);
    let snr = 10f64.powf(snr_db / 10.0);
    bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2 / 1e9
}

/// Access coverage predicate, shared by donors and nodes.
pub fn covers(from: Point, to: Point, radio: &RadioConfig) -> bool {
    let d = from.distance(to);
    match radio.coverage_mode {
        CoverageMode::Radius => d <= radio.coverage_radius_m,
        CoverageMode::Snr => d == 0.0 || above(d, radio.snr_threshold_db, radio),
    }
}

pub fn backhaul_reachable(from: Point, to: Point, radio: &RadioConfig) -> bool {
    let d = from.distance(to);
    match radio.coverage_mode {
        CoverageMode::Radius => d <= radio.backhaul_radius_m,
        CoverageMode::Snr => d == 0.0 || above(d, radio.backhaul_snr_threshold_db, radio),
    }
}

fn above(distance_m: f64, threshold_db: f64, radio: &RadioConfig) -> bool {
    link_snr_db(distance_m, radio).is_ok_and(|snr| snr > threshold_db)
}

/// Capacity of a backhaul hop, or infinity when capacity capping is off.
pub fn backhaul_capacity_gbps(from: Point, to: Point, radio: &RadioConfig) -> f64 {
    if !radio.cap_backhaul_by_capacity {
        return f64::INFINITY;
    }
    match link_snr_db(from.distance(to), radio) {
        Ok(snr) => shannon_rate_gbps(snr, radio.bandwidth_hz),
        Err(_) => f64::INFINITY,
    }
}
