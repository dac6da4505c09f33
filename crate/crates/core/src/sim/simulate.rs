use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};

use super::filter::Butterworth4;
use super::rng::clip_rng;
use super::{RadarConfig, SLOW_TIME_RATE_HZ};
use crate::error::{Error, Result};
use crate::signal::{resample_cubic_spline, Waveform, SPEECH_RATE_HZ};

/// Demodulated slow-time vibration trace and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct RfTrace {
    pub trace: Waveform,
    pub source_id: String,
    pub config: RadarConfig,
}

/// Wrap to (-π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi - 2.0 * PI * (phi / (2.0 * PI)).round();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Remove 2π jumps between consecutive samples.
pub fn unwrap_phase(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in wrapped {
        if let Some(q) = prev {
            let d = p - q;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(p + offset);
        prev = Some(p);
    }
    out
}

/// Simulate the mean-removed, unwrapped radar phase for one speech clip.
///
/// The result is not yet peak-normalized; corpus building scales all traces
/// of a corpus by one shared factor. The noise stream is selected by
/// `clip_id`, so clips can be simulated in any order.
pub fn simulate_trace(speech: &Waveform, cfg: &RadarConfig, clip_id: &str) -> Result<RfTrace> {
    cfg.validate()?;
    if (speech.sample_rate_hz() - SPEECH_RATE_HZ).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "speech must be at {SPEECH_RATE_HZ} Hz, got {}",
            speech.sample_rate_hz()
        )));
    }
    let min_len = (0.5 * SPEECH_RATE_HZ) as usize;
    if speech.len() < min_len {
        return Err(Error::TooShort {
            got: speech.len(),
            need: min_len,
        });
    }

    let lowpass = Butterworth4::lowpass(cfg.perception_cutoff_hz, SPEECH_RATE_HZ);
    let membrane = Waveform::new(lowpass.filtfilt(speech.samples()), SPEECH_RATE_HZ)?;
    let membrane = resample_cubic_spline(&membrane, SLOW_TIME_RATE_HZ)?;

    let k = 4.0 * PI / cfg.carrier_wavelength_m;
    let mut rng = clip_rng(cfg.rng_seed, clip_id);
    let noise = Normal::new(0.0, cfg.phase_noise_std_rad)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let wrapped: Vec<f64> = membrane
        .samples()
        .iter()
        .map(|&m| {
            let mut phi = k * cfg.displacement_gain_m * m + cfg.clutter_phase_rad;
            if cfg.phase_noise_std_rad > 0.0 {
                phi += noise.sample(&mut rng);
            }
            wrap_phase(phi)
        })
        .collect();
    let mut phase = unwrap_phase(&wrapped);
    // Offset by the first sample so constant traces cancel exactly.
    let first = phase[0];
    let mean = first + phase.iter().map(|p| p - first).sum::<f64>() / phase.len() as f64;
    for p in &mut phase {
        *p -= mean;
    }
    Ok(RfTrace {
        trace: Waveform::new(phase, SLOW_TIME_RATE_HZ)?,
        source_id: clip_id.to_string(),
        config: cfg.clone(),
    })
}
