use rustfft::num_complex::Complex64;

use super::stft::{istft, stft, Magnitude, Spectrogram};
use super::Waveform;
use crate::error::{Error, Result};

pub const DEFAULT_GL_ITERS: usize = 32;

/// Frobenius distance between `|stft(x)|` and the target magnitude.
pub fn consistency_gap(x: &Waveform, mag: &Magnitude) -> Result<f64> {
    Ok(stft(x)?.magnitude().distance(mag))
}

/// Griffin-Lim phase retrieval from zero initial phase.
pub fn griffin_lim(mag: &Magnitude, iters: usize) -> Result<Waveform> {
    griffin_lim_with_trace(mag, iters).map(|(w, _)| w)
}

/// Griffin-Lim that also reports the consistency gap of each iterate.
///
/// Entry `i` of the trace is the gap of the waveform synthesized at the start
/// of iteration `i`; the returned waveform is synthesized after the last
/// magnitude replacement.
pub fn griffin_lim_with_trace(mag: &Magnitude, iters: usize) -> Result<(Waveform, Vec<f64>)> {
    if iters == 0 {
        return Err(Error::InvalidArgument("griffin-lim needs at least one iteration".into()));
    }
    let n_bins = mag.frame(0).len();
    if let Some(pos) = mag.values().iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::NegativeMagnitude {
            frame: pos / n_bins,
            bin: pos % n_bins,
        });
    }
    let mut estimate = Spectrogram::from_parts(
        mag.values().iter().map(|&m| Complex64::new(m, 0.0)).collect(),
        mag.n_frames(),
        mag.length(),
        mag.sample_rate_hz(),
    )?;
    let mut gaps = Vec::with_capacity(iters);
    for _ in 0..iters {
        let x = istft(&estimate)?;
        let analysed = stft(&x)?;
        gaps.push(analysed.magnitude().distance(mag));
        estimate = analysed.with_magnitude(mag)?;
    }
    Ok((istft(&estimate)?, gaps))
}
