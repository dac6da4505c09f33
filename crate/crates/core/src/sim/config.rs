use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chirp repetition rate of the radar, which is the slow-time sample rate.
pub const SLOW_TIME_RATE_HZ: f64 = 5100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarConfig {
    pub slow_time_rate_hz: f64,
    pub carrier_wavelength_m: f64,
    pub perception_cutoff_hz: f64,
    pub phase_noise_std_rad: f64,
    pub clutter_phase_rad: f64,
    /// Membrane displacement for a unit-amplitude speech sample.
    pub displacement_gain_m: f64,
    pub rng_seed: u64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            slow_time_rate_hz: SLOW_TIME_RATE_HZ,
            carrier_wavelength_m: 3.9e-3,
            perception_cutoff_hz: 1000.0,
            phase_noise_std_rad: 2e-4,
            clutter_phase_rad: 0.7,
            displacement_gain_m: 5e-6,
            rng_seed: 17,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.slow_time_rate_hz != SLOW_TIME_RATE_HZ {
            return bad(format!(
                "slow_time_rate_hz must be {SLOW_TIME_RATE_HZ}, got {}",
                self.slow_time_rate_hz
            ));
        }
        if !(self.perception_cutoff_hz > 0.0 && self.perception_cutoff_hz < SLOW_TIME_RATE_HZ / 2.0)
        {
            return bad(format!(
                "perception_cutoff_hz must lie in (0, {}), got {}",
                SLOW_TIME_RATE_HZ / 2.0,
                self.perception_cutoff_hz
            ));
        }
        if !(self.carrier_wavelength_m > 0.0) {
            return bad("carrier_wavelength_m must be positive".into());
        }
        if !(self.displacement_gain_m > 0.0) {
            return bad("displacement_gain_m must be positive".into());
        }
        if !(self.phase_noise_std_rad >= 0.0) {
            return bad("phase_noise_std_rad must be non-negative".into());
        }
        if !self.clutter_phase_rad.is_finite() {
            return bad("clutter_phase_rad must be finite".into());
        }
        Ok(())
    }
}
