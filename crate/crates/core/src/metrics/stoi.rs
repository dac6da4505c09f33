//! Short-time objective intelligibility, following the classic 10 kHz
//! formulation (and the widely used Python port's numerics, including
//! its Octave-compatible polyphase resampler).

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::lsd::check_pair;
use crate::error::{Error, Result};
use crate::signal::{Waveform, SPEECH_RATE_HZ};

pub const STOI_RATE_HZ: usize = 10_000;
const FRAME: usize = 256;
const HOP: usize = FRAME / 2;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ_HZ: f64 = 150.0;
/// Frames per intermediate intelligibility segment (384 ms).
pub const SEGMENT_FRAMES: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Modified Bessel function of the first kind, order 0 (power series).
fn bessel_i0(x: f64) -> f64 {
    let (mut sum, mut term, mut k) = (1.0, 1.0, 1.0);
    let q = x * x / 4.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kaiser-windowed sinc anti-aliasing filter for rational resampling by
/// p/q, normalized to unit DC gain.
fn resample_filter(p: usize, q: usize) -> Vec<f64> {
    let rejection_db = 60.0;
    let stop = 1.0 / (2 * p.max(q)) as f64;
    let roll_off = stop / 10.0;
    let half = ((rejection_db - 8.0) / (28.714 * roll_off)).ceil() as isize;
    let beta = 0.1102 * (rejection_db - 8.7);
    let m = (2 * half + 1) as f64;
    let mut h: Vec<f64> = (-half..=half)
        .enumerate()
        .map(|(n, t)| {
            let r = 2.0 * n as f64 / (m - 1.0) - 1.0;
            let kaiser = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / bessel_i0(beta);
            kaiser * 2.0 * p as f64 * stop * sinc(2.0 * stop * t as f64)
        })
        .collect();
    let total: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= total);
    h
}

/// Polyphase resampling by `up / down` with zero padding; output sample `i`
/// is aligned to the filter centre.
pub fn resample_poly(x: &[f64], up: usize, down: usize) -> Vec<f64> {
    let g = gcd(up, down);
    let (up, down) = (up / g, down / g);
    if up == down {
        return x.to_vec();
    }
    let h: Vec<f64> = resample_filter(up, down).iter().map(|v| v * up as f64).collect();
    let half = (h.len() - 1) / 2;
    let pre_pad = down - half % down;
    let pre_remove = (half + pre_pad) / down;
    let n_out = (x.len() * up).div_ceil(down);
    (0..n_out)
        .map(|i| {
            // Position in the zero-stuffed input aligned with tap 0.
            let pos = ((i + pre_remove) * down) as isize - pre_pad as isize;
            let mut acc = 0.0;
            // Only taps landing on non-zero (multiple of `up`) samples count.
            let first = pos.rem_euclid(up as isize) as usize;
            let mut k = first;
            while k < h.len() {
                let j = pos - k as isize;
                if j < 0 {
                    break;
                }
                let src = (j / up as isize) as usize;
                if src < x.len() {
                    acc += h[k] * x[src];
                }
                k += up;
            }
            acc
        })
        .collect()
}

struct Tables {
    window: Vec<f64>,
    bands: Vec<(usize, usize)>,
    fft: Arc<dyn Fft<f64>>,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        // Symmetric Hann of length FRAME + 2 with the zero end points removed.
        let window = (1..=FRAME)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (FRAME + 1) as f64).cos())
            .collect();
        let freqs: Vec<f64> = (0..=NFFT / 2)
            .map(|k| k as f64 * STOI_RATE_HZ as f64 / NFFT as f64)
            .collect();
        let nearest = |target: f64| {
            let mut best = 0;
            for (i, f) in freqs.iter().enumerate() {
                if (f - target).powi(2) < (freqs[best] - target).powi(2) {
                    best = i;
                }
            }
            best
        };
        let bands = (0..BANDS)
            .map(|k| {
                let k = k as f64;
                let lo = MIN_FREQ_HZ * 2f64.powf((2.0 * k - 1.0) / 6.0);
                let hi = MIN_FREQ_HZ * 2f64.powf((2.0 * k + 1.0) / 6.0);
                (nearest(lo), nearest(hi))
            })
            .collect();
        Tables {
            window,
            bands,
            fft: FftPlanner::new().plan_fft_forward(NFFT),
        }
    })
}

fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME)).step_by(HOP)
}

fn overlap_add(frames: &[Vec<f64>]) -> Vec<f64> {
    if frames.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; (frames.len() - 1) * HOP + FRAME];
    for (i, f) in frames.iter().enumerate() {
        for (o, v) in out[i * HOP..].iter_mut().zip(f) {
            *o += v;
        }
    }
    out
}

/// Drop frames of both signals where the reference is more than 40 dB
/// below its loudest frame, then resynthesize by overlap-add.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = &tables().window;
    let windowed = |s: &[f64], i: usize| -> Vec<f64> { s[i..i + FRAME].iter().zip(w).map(|(a, b)| a * b).collect() };
    let xf: Vec<Vec<f64>> = frame_starts(x.len()).map(|i| windowed(x, i)).collect();
    let yf: Vec<Vec<f64>> = frame_starts(x.len()).map(|i| windowed(y, i)).collect();
    let energy: Vec<f64> = xf
        .iter()
        .map(|f| 20.0 * (f.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS).log10())
        .collect();
    let max = energy.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if energy.is_empty() || max <= 20.0 * EPS.log10() {
        return Err(Error::NoActiveFrames);
    }
    let keep: Vec<bool> = energy.iter().map(|e| max - DYN_RANGE_DB - e < 0.0).collect();
    let pick = |f: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        f.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| v).collect()
    };
    Ok((overlap_add(&pick(xf)), overlap_add(&pick(yf))))
}

/// One-third octave band envelopes, `[band][frame]`.
fn band_envelopes(x: &[f64]) -> Vec<Vec<f64>> {
    let t = tables();
    let mut scratch = vec![Complex64::default(); t.fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); NFFT];
    let mut out = vec![Vec::new(); BANDS];
    for i in frame_starts(x.len()) {
        buf.iter_mut().for_each(|c| *c = Complex64::default());
        for (k, (s, w)) in x[i..i + FRAME].iter().zip(&t.window).enumerate() {
            buf[k] = Complex64::new(s * w, 0.0);
        }
        t.fft.process_with_scratch(&mut buf, &mut scratch);
        for (b, &(lo, hi)) in t.bands.iter().enumerate() {
            let e: f64 = buf[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            out[b].push(e.sqrt());
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// STOI of `est` against `reference` on raw samples at `rate_hz`.
pub fn stoi_samples(reference: &[f64], est: &[f64], rate_hz: usize) -> Result<f64> {
    if reference.len() != est.len() {
        return Err(Error::InvalidArgument(format!(
            "stoi needs equal lengths, got {} and {}",
            reference.len(),
            est.len()
        )));
    }
    let (x, y) = if rate_hz == STOI_RATE_HZ {
        (reference.to_vec(), est.to_vec())
    } else {
        (
            resample_poly(reference, STOI_RATE_HZ, rate_hz),
            resample_poly(est, STOI_RATE_HZ, rate_hz),
        )
    };
    let (x, y) = remove_silent_frames(&x, &y)?;
    let (xb, yb) = (band_envelopes(&x), band_envelopes(&y));
    let frames = xb[0].len();
    if frames < SEGMENT_FRAMES {
        return Err(Error::TooShort {
            got: frames,
            need: SEGMENT_FRAMES,
        });
    }
    let clip = 1.0 + 10f64.powf(-BETA_DB / 20.0);
    let segments = frames - SEGMENT_FRAMES + 1;
    let mut total = 0.0;
    for m in 0..segments {
        for b in 0..BANDS {
            let xs = &xb[b][m..m + SEGMENT_FRAMES];
            let ys = &yb[b][m..m + SEGMENT_FRAMES];
            let scale = norm(xs) / (norm(ys) + EPS);
            let mut yp: Vec<f64> = ys.iter().zip(xs).map(|(y, x)| (y * scale).min(x * clip)).collect();
            let mut xc = xs.to_vec();
            for v in [&mut yp, &mut xc] {
                let mean = v.iter().sum::<f64>() / SEGMENT_FRAMES as f64;
                v.iter_mut().for_each(|a| *a -= mean);
                let n = norm(v) + EPS;
                v.iter_mut().for_each(|a| *a /= n);
            }
            total += yp.iter().zip(&xc).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(total / (segments * BANDS) as f64)
}

/// STOI of two 8 kHz waveforms of equal length.
pub fn stoi(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    check_pair(reference, estimate)?;
    stoi_samples(reference.samples(), estimate.samples(), SPEECH_RATE_HZ as usize)
}
