use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Waveform;
use crate::error::{Error, Result};

pub const N_FFT: usize = 512;
pub const HOP: usize = 128;
pub const N_BINS: usize = N_FFT / 2 + 1;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

fn plans() -> &'static Plans {
    static PLANS: OnceLock<Plans> = OnceLock::new();
    PLANS.get_or_init(|| {
        let mut planner = FftPlanner::new();
        Plans {
            forward: planner.plan_fft_forward(N_FFT),
            inverse: planner.plan_fft_inverse(N_FFT),
            window: hann(N_FFT),
        }
    })
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn frame_count(length: usize) -> usize {
    1 + length / HOP
}

/// One-sided complex STFT, frames × bins, with the geometry needed to invert
/// it back to a waveform of the original length.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    bins: Vec<Complex64>,
    n_frames: usize,
    length: usize,
    sample_rate_hz: f64,
}

impl Spectrogram {
    pub fn from_parts(
        bins: Vec<Complex64>,
        n_frames: usize,
        length: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        check_geometry(bins.len(), n_frames, length)?;
        if !(sample_rate_hz > 0.0) {
            return Err(Error::Geometry(format!("sample rate {sample_rate_hz}")));
        }
        Ok(Spectrogram {
            bins,
            n_frames,
            length,
            sample_rate_hz,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        N_BINS
    }

    pub fn n_fft(&self) -> usize {
        N_FFT
    }

    pub fn hop(&self) -> usize {
        HOP
    }

    /// Length in samples of the analysed waveform.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.bins[t * N_BINS..(t + 1) * N_BINS]
    }

    pub fn magnitude(&self) -> Magnitude {
        Magnitude {
            values: self.bins.iter().map(|c| c.norm()).collect(),
            n_frames: self.n_frames,
            length: self.length,
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Combine a magnitude with the phase of this spectrogram. Bins where this
    /// spectrogram is exactly zero take zero phase.
    pub fn with_magnitude(&self, mag: &Magnitude) -> Result<Spectrogram> {
        if mag.n_frames != self.n_frames || mag.length != self.length {
            return Err(Error::Geometry(format!(
                "magnitude has {} frames / {} samples, phase source has {} / {}",
                mag.n_frames, mag.length, self.n_frames, self.length
            )));
        }
        let bins = self
            .bins
            .iter()
            .zip(&mag.values)
            .map(|(c, &m)| {
                let r = c.norm();
                if r > 0.0 {
                    c * (m / r)
                } else {
                    Complex64::new(m, 0.0)
                }
            })
            .collect();
        Spectrogram::from_parts(bins, self.n_frames, self.length, self.sample_rate_hz)
    }
}

fn check_geometry(n_values: usize, n_frames: usize, length: usize) -> Result<()> {
    if n_frames != frame_count(length) {
        return Err(Error::Geometry(format!(
            "{n_frames} frames inconsistent with {length} samples at hop {HOP}"
        )));
    }
    if n_values != n_frames * N_BINS {
        return Err(Error::Geometry(format!(
            "{n_values} values, expected {n_frames} x {N_BINS}"
        )));
    }
    Ok(())
}

/// Real magnitude matrix, frames × bins, with the same geometry metadata as
/// [`Spectrogram`].
#[derive(Clone, Debug, PartialEq)]
pub struct Magnitude {
    values: Vec<f64>,
    n_frames: usize,
    length: usize,
    sample_rate_hz: f64,
}

impl Magnitude {
    pub fn from_parts(
        values: Vec<f64>,
        n_frames: usize,
        length: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        check_geometry(values.len(), n_frames, length)?;
        Ok(Magnitude {
            values,
            n_frames,
            length,
            sample_rate_hz,
        })
    }

    /// Magnitude for `n_frames` frames; the signal length is the longest one
    /// consistent with that frame count's lower bound.
    pub fn for_frames(values: Vec<f64>, n_frames: usize, sample_rate_hz: f64) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::Geometry("zero frames".into()));
        }
        Self::from_parts(values, n_frames, (n_frames - 1) * HOP, sample_rate_hz)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * N_BINS..(t + 1) * N_BINS]
    }

    /// Frobenius distance to another magnitude of the same geometry.
    pub fn distance(&self, other: &Magnitude) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Hann-windowed 512-point STFT at hop 128 with centred, reflect-padded
/// frames.
pub fn stft(w: &Waveform) -> Result<Spectrogram> {
    let x = w.samples();
    let length = x.len();
    if length < N_FFT {
        return Err(Error::TooShort {
            got: length,
            need: N_FFT,
        });
    }
    let plans = plans();
    let pad = N_FFT / 2;
    let n_frames = frame_count(length);
    let mut bins = Vec::with_capacity(n_frames * N_BINS);
    let mut buf = vec![Complex64::default(); N_FFT];
    let mut scratch = vec![Complex64::default(); plans.forward.get_inplace_scratch_len()];
    for t in 0..n_frames {
        let start = (t * HOP) as isize - pad as isize;
        for (i, slot) in buf.iter_mut().enumerate() {
            let idx = reflect(start + i as isize, length);
            *slot = Complex64::new(x[idx] * plans.window[i], 0.0);
        }
        plans.forward.process_with_scratch(&mut buf, &mut scratch);
        bins.extend_from_slice(&buf[..N_BINS]);
    }
    Spectrogram::from_parts(bins, n_frames, length, w.sample_rate_hz())
}

fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    let mut i = i;
    // A single reflection suffices because the pad is shorter than the signal.
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i as usize
}

/// Least-squares overlap-add inverse of [`stft`].
pub fn istft(s: &Spectrogram) -> Result<Waveform> {
    check_geometry(s.bins.len(), s.n_frames, s.length)?;
    let plans = plans();
    let pad = N_FFT / 2;
    let total = (s.n_frames - 1) * HOP + N_FFT;
    let mut acc = vec![0.0; total];
    let mut norm = vec![0.0; total];
    let mut buf = vec![Complex64::default(); N_FFT];
    let mut scratch = vec![Complex64::default(); plans.inverse.get_inplace_scratch_len()];
    let scale = 1.0 / N_FFT as f64;
    for t in 0..s.n_frames {
        let frame = s.frame(t);
        buf[..N_BINS].copy_from_slice(frame);
        // DC and Nyquist bins of a real signal's spectrum are real.
        buf[0].im = 0.0;
        buf[N_FFT / 2].im = 0.0;
        for k in 1..N_FFT / 2 {
            buf[N_FFT - k] = frame[k].conj();
        }
        plans.inverse.process_with_scratch(&mut buf, &mut scratch);
        let offset = t * HOP;
        for i in 0..N_FFT {
            let win = plans.window[i];
            acc[offset + i] += buf[i].re * scale * win;
            norm[offset + i] += win * win;
        }
    }
    let out = (pad..pad + s.length)
        .map(|i| if norm[i] > 1e-11 { acc[i] / norm[i] } else { 0.0 })
        .collect();
    Waveform::new(out, s.sample_rate_hz)
}
