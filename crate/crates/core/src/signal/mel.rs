use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use super::stft::{Magnitude, Spectrogram, N_BINS, N_FFT};
use super::SPEECH_RATE_HZ;
use crate::error::{Error, Result};

pub const MEL_BANDS: usize = 80;
pub const MEL_FMIN_HZ: f64 = 60.0;
pub const MEL_FMAX_HZ: f64 = 4000.0;
/// Power floor applied before taking log10.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-scale filterbank, 80 bands × 257 bins, with its
/// pseudo-inverse.
#[derive(Debug)]
pub struct MelFilterbank {
    weights: Vec<f64>,
    pinv: Vec<f64>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    fn build() -> Self {
        let lo = hz_to_mel(MEL_FMIN_HZ);
        let hi = hz_to_mel(MEL_FMAX_HZ);
        let points: Vec<f64> = (0..MEL_BANDS + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (MEL_BANDS + 1) as f64))
            .collect();
        let mut weights = vec![0.0; MEL_BANDS * N_BINS];
        for b in 0..MEL_BANDS {
            let (left, center, right) = (points[b], points[b + 1], points[b + 2]);
            for k in 0..N_BINS {
                let f = bin_frequency(k);
                let rise = (f - left) / (center - left);
                let fall = (right - f) / (right - center);
                weights[b * N_BINS + k] = rise.min(fall).max(0.0);
            }
        }
        let pinv = pseudo_inverse(&weights);
        MelFilterbank {
            weights,
            pinv,
            centers_hz: points[1..=MEL_BANDS].to_vec(),
        }
    }

    /// Row-major 80 × 257 weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, band: usize) -> &[f64] {
        &self.weights[band * N_BINS..(band + 1) * N_BINS]
    }

    /// Row-major 257 × 80 Moore-Penrose pseudo-inverse.
    pub fn pseudo_inverse(&self) -> &[f64] {
        &self.pinv
    }

    pub fn center_frequencies_hz(&self) -> &[f64] {
        &self.centers_hz
    }
}

pub fn bin_frequency(k: usize) -> f64 {
    k as f64 * SPEECH_RATE_HZ / N_FFT as f64
}

fn pseudo_inverse(weights: &[f64]) -> Vec<f64> {
    let fb = DMatrix::from_row_slice(MEL_BANDS, N_BINS, weights);
    // Rows are linearly independent, so pinv = Fᵀ (F Fᵀ)⁻¹.
    let gram = &fb * fb.transpose();
    let inv = gram
        .cholesky()
        .expect("mel filterbank rows are linearly independent")
        .inverse();
    let pinv = fb.transpose() * inv;
    let mut out = Vec::with_capacity(N_BINS * MEL_BANDS);
    for r in 0..N_BINS {
        for c in 0..MEL_BANDS {
            out.push(pinv[(r, c)]);
        }
    }
    out
}

/// Shared filterbank for the fixed 8 kHz / 512-point configuration.
pub fn mel_filterbank() -> Arc<MelFilterbank> {
    static FB: OnceLock<Arc<MelFilterbank>> = OnceLock::new();
    FB.get_or_init(|| Arc::new(MelFilterbank::build())).clone()
}

/// Log-power Mel spectrogram, bands × frames, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    values: Vec<f64>,
    n_frames: usize,
    normalized: bool,
}

impl MelSpectrogram {
    pub fn new(values: Vec<f64>, n_frames: usize, normalized: bool) -> Result<Self> {
        if n_frames == 0 || values.len() != MEL_BANDS * n_frames {
            return Err(Error::Geometry(format!(
                "{} values for {MEL_BANDS} bands x {n_frames} frames",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mel spectrogram"));
        }
        Ok(MelSpectrogram {
            values,
            n_frames,
            normalized,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n_bands(&self) -> usize {
        MEL_BANDS
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.values[band * self.n_frames + frame]
    }

    /// Frames `[start, start + len)` as a new spectrogram.
    pub fn crop(&self, start: usize, len: usize) -> Result<MelSpectrogram> {
        if len == 0 || start + len > self.n_frames {
            return Err(Error::Geometry(format!(
                "crop {start}+{len} outside {} frames",
                self.n_frames
            )));
        }
        let mut values = Vec::with_capacity(MEL_BANDS * len);
        for b in 0..MEL_BANDS {
            let row = &self.values[b * self.n_frames..(b + 1) * self.n_frames];
            values.extend_from_slice(&row[start..start + len]);
        }
        MelSpectrogram::new(values, len, self.normalized)
    }

    /// Affine map `(v - mean) / std`.
    pub fn normalize(&self, mean: f64, std: f64) -> Result<MelSpectrogram> {
        if self.normalized {
            return Err(Error::InvalidArgument("already normalized".into()));
        }
        let values = self.values.iter().map(|v| (v - mean) / std).collect();
        MelSpectrogram::new(values, self.n_frames, true)
    }

    pub fn denormalize(&self, mean: f64, std: f64) -> Result<MelSpectrogram> {
        if !self.normalized {
            return Err(Error::InvalidArgument("not normalized".into()));
        }
        let values = self.values.iter().map(|v| v * std + mean).collect();
        MelSpectrogram::new(values, self.n_frames, false)
    }
}

/// `log10(max(F · |X|², 1e-10))` per frame.
pub fn log_mel(s: &Spectrogram) -> Result<MelSpectrogram> {
    if s.n_bins() != N_BINS || s.n_fft() != N_FFT {
        return Err(Error::Geometry(format!(
            "spectrogram has {} bins, filterbank expects {N_BINS}",
            s.n_bins()
        )));
    }
    if (s.sample_rate_hz() - SPEECH_RATE_HZ).abs() > 1e-9 {
        return Err(Error::Geometry(format!(
            "spectrogram at {} Hz, filterbank built for {SPEECH_RATE_HZ} Hz",
            s.sample_rate_hz()
        )));
    }
    let fb = mel_filterbank();
    let n_frames = s.n_frames();
    let mut values = vec![0.0; MEL_BANDS * n_frames];
    let mut power = vec![0.0; N_BINS];
    for t in 0..n_frames {
        for (p, c) in power.iter_mut().zip(s.frame(t)) {
            *p = c.norm_sqr();
        }
        for b in 0..MEL_BANDS {
            let e: f64 = fb.row(b).iter().zip(&power).map(|(w, p)| w * p).sum();
            values[b * n_frames + t] = e.max(LOG_FLOOR).log10();
        }
    }
    MelSpectrogram::new(values, n_frames, false)
}

/// Approximate linear magnitude from a log-Mel spectrogram via the clamped
/// filterbank pseudo-inverse. The result describes a signal of
/// `(frames - 1) * hop` samples at 8 kHz.
pub fn invert_mel(m: &MelSpectrogram) -> Result<Magnitude> {
    if m.is_normalized() {
        return Err(Error::NormalizedMel);
    }
    let fb = mel_filterbank();
    let pinv = fb.pseudo_inverse();
    let n_frames = m.n_frames();
    let mut out = vec![0.0; n_frames * N_BINS];
    let mut mel_power = vec![0.0; MEL_BANDS];
    for t in 0..n_frames {
        for (b, p) in mel_power.iter_mut().enumerate() {
            *p = 10f64.powf(m.get(b, t));
        }
        for k in 0..N_BINS {
            let row = &pinv[k * MEL_BANDS..(k + 1) * MEL_BANDS];
            let p: f64 = row.iter().zip(&mel_power).map(|(a, b)| a * b).sum();
            out[t * N_BINS + k] = p.max(0.0).sqrt();
        }
    }
    Magnitude::for_frames(out, n_frames, SPEECH_RATE_HZ)
}
