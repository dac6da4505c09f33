use super::features::rf_mel;
use super::state::TrainingState;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::signal::{MelSpectrogram, Waveform, MEL_BANDS};
use crate::sim::SLOW_TIME_RATE_HZ;

/// Window start frames covering `frames` with windows of `win` at hop
/// `win / 2`; a final window is aligned to the end when the hop grid
/// misses it.
pub fn window_starts(frames: usize, win: usize) -> Result<Vec<usize>> {
    if frames < win {
        return Err(Error::TooShort { got: frames, need: win });
    }
    let hop = (win / 2).max(1);
    let mut starts: Vec<usize> = (0..=(frames - win) / hop).map(|i| i * hop).collect();
    let last = *starts.last().unwrap();
    if last + win < frames {
        starts.push(frames - win);
    }
    Ok(starts)
}

/// Blend overlapping windows (`bands × win`, row-major) into one
/// `bands × frames` map. Inside an overlap the weight of the incoming
/// window ramps linearly from 0 to 1, written as `a + α (b − a)` so equal
/// windows are reproduced exactly.
pub fn cross_fade(windows: &[(usize, Vec<f64>)], bands: usize, win: usize, frames: usize) -> Vec<f64> {
    let mut out = vec![0.0; bands * frames];
    let mut covered = 0usize;
    for (start, w) in windows {
        let overlap = covered.saturating_sub(*start).min(win);
        for b in 0..bands {
            for k in 0..win {
                let v = w[b * win + k];
                let slot = &mut out[b * frames + start + k];
                if k < overlap {
                    let alpha = (k + 1) as f64 / (overlap + 1) as f64;
                    *slot += alpha * (v - *slot);
                } else {
                    *slot = v;
                }
            }
        }
        covered = covered.max(start + win);
    }
    out
}

/// Recover the speech log-Mel spectrogram (denormalized) from a 5.1 kHz
/// RF trace.
pub fn infer(state: &TrainingState, rf: &Waveform) -> Result<MelSpectrogram> {
    if (rf.sample_rate_hz() - SLOW_TIME_RATE_HZ).abs() > 1e-9 {
        return Err(Error::Geometry(format!(
            "RF trace at {} Hz, expected {SLOW_TIME_RATE_HZ}",
            rf.sample_rate_hz()
        )));
    }
    let net = state.network()?;
    let cfg = net.config();
    if cfg.input_bands != MEL_BANDS {
        return Err(Error::InvalidArgument(format!("inference needs input_bands = {MEL_BANDS}")));
    }
    let win = cfg.input_frames;
    let input = state.stats.normalize_rf(&rf_mel(rf)?)?;
    let frames = input.n_frames();
    let starts = window_starts(frames, win)?;
    let mut windows = Vec::with_capacity(starts.len());
    for &s in &starts {
        let crop = input.crop(s, win)?;
        let x = Tensor::new(
            &[1, 1, MEL_BANDS, win],
            crop.values().iter().map(|&v| v as f32).collect(),
        )?;
        let y = net.predict(&state.params, &x)?;
        windows.push((s, y.data().iter().map(|&v| v as f64).collect()));
    }
    let values = cross_fade(&windows, MEL_BANDS, win, frames);
    state.stats.denormalize_speech(&MelSpectrogram::new(values, frames, true)?)
}
