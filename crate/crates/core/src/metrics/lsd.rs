use crate::error::{Error, Result};
use crate::signal::{stft, Waveform, LOG_FLOOR, SPEECH_RATE_HZ};

/// Largest accepted relative length difference between the two signals.
pub const LENGTH_TOLERANCE: f64 = 0.1;

pub(crate) fn check_pair(reference: &Waveform, estimate: &Waveform) -> Result<usize> {
    for w in [reference, estimate] {
        if (w.sample_rate_hz() - SPEECH_RATE_HZ).abs() > 1e-9 {
            return Err(Error::Geometry(format!(
                "metric inputs must be at {SPEECH_RATE_HZ} Hz, got {}",
                w.sample_rate_hz()
            )));
        }
    }
    let (a, b) = (reference.len(), estimate.len());
    let (lo, hi) = (a.min(b), a.max(b));
    if (hi - lo) as f64 > LENGTH_TOLERANCE * hi as f64 {
        return Err(Error::InvalidArgument(format!(
            "lengths {a} and {b} differ by more than {}%",
            LENGTH_TOLERANCE * 100.0
        )));
    }
    Ok(lo)
}

/// Log-spectral distance: mean over frames of the RMS (over bins)
/// difference of log10 power spectra, with the pipeline STFT.
pub fn lsd(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    let n = check_pair(reference, estimate)?;
    let sa = stft(&reference.truncated(n))?;
    let sb = stft(&estimate.truncated(n))?;
    let mut total = 0.0;
    for t in 0..sa.n_frames() {
        let mut acc = 0.0;
        for (x, y) in sa.frame(t).iter().zip(sb.frame(t)) {
            let d = x.norm_sqr().max(LOG_FLOOR).log10() - y.norm_sqr().max(LOG_FLOOR).log10();
            acc += d * d;
        }
        total += (acc / sa.n_bins() as f64).sqrt();
    }
    Ok(total / sa.n_frames() as f64)
}
