//! Built-in speech-like test material: voiced syllables built from formant
//! shaped harmonic series, preceded by fricative noise bursts and separated
//! by short pauses.

use std::f64::consts::PI;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::filter::Butterworth4;
use super::rng::clip_rng;
use crate::error::Result;
use crate::signal::{Waveform, SPEECH_RATE_HZ};

/// (F1, F2, F3) in Hz for a handful of vowels.
const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [660.0, 1720.0, 2410.0],
];
const BANDWIDTHS: [f64; 3] = [90.0, 110.0, 160.0];
const FORMANT_GAINS: [f64; 3] = [1.0, 0.7, 0.45];
const BLOCK: usize = 80;

fn formant_envelope(f: f64, formants: &[f64; 3]) -> f64 {
    let resonance: f64 = formants
        .iter()
        .zip(BANDWIDTHS)
        .zip(FORMANT_GAINS)
        .map(|((&fc, bw), g)| g / (1.0 + ((f - fc) / bw).powi(2)))
        .sum();
    resonance / (1.0 + f / 1500.0) + 0.01
}

fn ramp(i: usize, len: usize, edge: usize) -> f64 {
    let edge = edge.min(len / 2).max(1);
    let pos = i.min(len - 1 - i);
    if pos >= edge {
        1.0
    } else {
        0.5 - 0.5 * (PI * pos as f64 / edge as f64).cos()
    }
}

fn voiced(rng: &mut ChaCha8Rng, base_f0: f64, out: &mut Vec<f64>) {
    let len = (rng.random_range(0.12..0.35) * SPEECH_RATE_HZ) as usize;
    let formants = VOWELS[rng.random_range(0..VOWELS.len())];
    let shift: f64 = rng.random_range(0.92..1.08);
    let formants = formants.map(|f| f * shift);
    let glide: f64 = rng.random_range(-0.15..0.15);
    let loudness: f64 = rng.random_range(0.5..1.0);
    let mut phase = 0.0f64;
    let mut amps: Vec<f64> = Vec::new();
    for i in 0..len {
        let progress = i as f64 / len as f64;
        let f0 = base_f0 * (1.0 + glide * progress + 0.02 * (2.0 * PI * 5.0 * progress).sin());
        if i % BLOCK == 0 {
            let n_harm = (3900.0 / f0) as usize;
            amps = (1..=n_harm)
                .map(|h| formant_envelope(h as f64 * f0, &formants))
                .collect();
        }
        phase += 2.0 * PI * f0 / SPEECH_RATE_HZ;
        let s: f64 = amps
            .iter()
            .enumerate()
            .map(|(h, a)| a * ((h + 1) as f64 * phase).sin())
            .sum();
        out.push(loudness * s * ramp(i, len, 160));
    }
}

fn fricative(rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
    let len = (rng.random_range(0.04..0.11) * SPEECH_RATE_HZ) as usize;
    let white: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let low = Butterworth4::lowpass(1800.0, SPEECH_RATE_HZ).filter(&white);
    let gain: f64 = rng.random_range(0.1..0.3);
    for i in 0..len {
        out.push(gain * (white[i] - low[i]) * ramp(i, len, 40));
    }
}

/// A speech-like clip of about `duration_s` seconds at 8 kHz, peak 0.9.
pub fn synthetic_clip(seed: u64, id: &str, duration_s: f64) -> Result<Waveform> {
    let mut rng = clip_rng(seed, id);
    let target = (duration_s * SPEECH_RATE_HZ) as usize;
    let base_f0: f64 = rng.random_range(95.0..220.0);
    let mut out = Vec::with_capacity(target + 4000);
    out.extend(std::iter::repeat_n(0.0, (0.05 * SPEECH_RATE_HZ) as usize));
    while out.len() < target {
        if rng.random_bool(0.5) {
            fricative(&mut rng, &mut out);
        }
        voiced(&mut rng, base_f0, &mut out);
        let pause = (rng.random_range(0.02..0.15) * SPEECH_RATE_HZ) as usize;
        out.extend(std::iter::repeat_n(0.0, pause));
    }
    out.truncate(target);
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut out {
            *v *= 0.9 / peak;
        }
    }
    Waveform::new(out, SPEECH_RATE_HZ)
}

/// `count` clips with ids `clip000`, `clip001`, … and durations drawn from
/// [1.5, 3.5) s.
pub fn synthetic_clips(count: usize, seed: u64) -> Result<Vec<(String, Waveform)>> {
    (0..count)
        .map(|i| {
            let id = format!("clip{i:03}");
            let mut rng = clip_rng(seed ^ 0x5eed_c11f, &id);
            let duration = rng.random_range(1.5..3.5);
            Ok((id.clone(), synthetic_clip(seed, &id, duration)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{log_mel, stft};

    #[test]
    fn clips_are_deterministic_and_bounded() {
        let a = synthetic_clip(3, "x", 2.0).unwrap();
        let b = synthetic_clip(3, "x", 2.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16000);
        assert!((a.peak() - 0.9).abs() < 1e-12);
        assert_ne!(a, synthetic_clip(4, "x", 2.0).unwrap());
    }

    #[test]
    fn clips_carry_energy_above_one_khz() {
        let a = synthetic_clip(5, "y", 2.0).unwrap();
        let m = log_mel(&stft(&a).unwrap()).unwrap();
        // Upper half of the mel bands is well above the floor somewhere.
        let top = (60..80)
            .flat_map(|b| (0..m.n_frames()).map(move |t| (b, t)))
            .map(|(b, t)| m.get(b, t))
            .fold(f64::MIN, f64::max);
        assert!(top > -4.0, "{top}");
    }
}
