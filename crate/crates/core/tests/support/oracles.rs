//! Loop-level reference implementations, written independently of the
//! library code they check.

use std::f64::consts::PI;

/// Zero-padded "same" cross-correlation with ceil-mode stride.
/// x: [n, ci, h, w], k: [co, ci, kh, kw], b: [co].
pub fn conv2d(
    x: &[f64],
    xs: [usize; 4],
    k: &[f64],
    ks: [usize; 4],
    b: &[f64],
    stride: usize,
) -> (Vec<f64>, [usize; 4]) {
    let [n, ci, h, w] = xs;
    let [co, _, kh, kw] = ks;
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let mut out = vec![0.0; n * co * oh * ow];
    for bn in 0..n {
        for o in 0..co {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = b[o];
                    for c in 0..ci {
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let iy = (y * stride + dy) as isize - (kh / 2) as isize;
                                let ix = (xo * stride + dx) as isize - (kw / 2) as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += x[((bn * ci + c) * h + iy as usize) * w + ix as usize]
                                    * k[((o * ci + c) * kh + dy) * kw + dx];
                            }
                        }
                    }
                    out[((bn * co + o) * oh + y) * ow + xo] = acc;
                }
            }
        }
    }
    (out, [n, co, oh, ow])
}

/// Scaled dot-product attention per head; q, k, v are [batch·seq, d].
pub fn attention(q: &[f64], k: &[f64], v: &[f64], batch: usize, seq: usize, d: usize, heads: usize) -> Vec<f64> {
    let dh = d / heads;
    let mut out = vec![0.0; batch * seq * d];
    for b in 0..batch {
        for h in 0..heads {
            for i in 0..seq {
                let mut scores = vec![0.0; seq];
                for (j, s) in scores.iter_mut().enumerate() {
                    let mut dot = 0.0;
                    for c in 0..dh {
                        dot += q[(b * seq + i) * d + h * dh + c] * k[(b * seq + j) * d + h * dh + c];
                    }
                    *s = dot / (dh as f64).sqrt();
                }
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for c in 0..dh {
                    let mut acc = 0.0;
                    for j in 0..seq {
                        acc += e[j] / z * v[(b * seq + j) * d + h * dh + c];
                    }
                    out[(b * seq + i) * d + h * dh + c] = acc;
                }
            }
        }
    }
    out
}

/// f_out(:, t) = W · f_in(:, t) for every batch item, channel and frame.
/// x: [n, c, f, t], w: [f, f].
pub fn freq_transform(x: &[f64], xs: [usize; 4], w: &[f64]) -> Vec<f64> {
    let [n, c, f, t] = xs;
    let mut out = vec![0.0; x.len()];
    for plane in 0..n * c {
        for tt in 0..t {
            for i in 0..f {
                let mut acc = 0.0;
                for j in 0..f {
                    acc += w[i * f + j] * x[(plane * f + j) * t + tt];
                }
                out[(plane * f + i) * t + tt] = acc;
            }
        }
    }
    out
}

/// Power spectrogram via a direct DFT: 512-point periodic Hann, hop 128,
/// centred frames with reflect padding. Returns frames of 257 bins.
pub fn power_spectrogram(x: &[f64]) -> Vec<Vec<f64>> {
    const N: usize = 512;
    const HOP: usize = 128;
    let len = x.len() as isize;
    let refl = |i: isize| -> f64 {
        let j = if i < 0 { -i } else if i >= len { 2 * (len - 1) - i } else { i };
        x[j as usize]
    };
    let win: Vec<f64> = (0..N).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / N as f64).cos()).collect();
    let frames = 1 + x.len() / HOP;
    (0..frames)
        .map(|t| {
            let seg: Vec<f64> = (0..N)
                .map(|i| refl((t * HOP + i) as isize - (N / 2) as isize) * win[i])
                .collect();
            (0..=N / 2)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (i, s) in seg.iter().enumerate() {
                        let ang = -2.0 * PI * ((k * i) % N) as f64 / N as f64;
                        re += s * ang.cos();
                        im += s * ang.sin();
                    }
                    re * re + im * im
                })
                .collect()
        })
        .collect()
}

/// HTK-scale triangular filterbank, 80 bands over 60–4000 Hz for a
/// 512-point FFT at 8 kHz.
pub fn mel_weights() -> Vec<Vec<f64>> {
    let to_mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let to_hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let (lo, hi) = (to_mel(60.0), to_mel(4000.0));
    let edges: Vec<f64> = (0..82).map(|i| to_hz(lo + (hi - lo) * i as f64 / 81.0)).collect();
    (0..80)
        .map(|b| {
            (0..257)
                .map(|k| {
                    let f = k as f64 * 8000.0 / 512.0;
                    let up = (f - edges[b]) / (edges[b + 1] - edges[b]);
                    let down = (edges[b + 2] - f) / (edges[b + 2] - edges[b + 1]);
                    up.min(down).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// log10 Mel energies, [band][frame].
pub fn log_mel(x: &[f64]) -> Vec<Vec<f64>> {
    let p = power_spectrogram(x);
    let w = mel_weights();
    w.iter()
        .map(|row| {
            p.iter()
                .map(|frame| {
                    let e: f64 = row.iter().zip(frame).map(|(a, b)| a * b).sum();
                    e.max(1e-10).log10()
                })
                .collect()
        })
        .collect()
}

/// Log-spectral distance over equal-length signals.
pub fn lsd(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (pa, pb) = (power_spectrogram(&a[..n]), power_spectrogram(&b[..n]));
    let mut total = 0.0;
    for (fa, fb) in pa.iter().zip(&pb) {
        let mut acc = 0.0;
        for (x, y) in fa.iter().zip(fb) {
            let d = x.max(1e-10).log10() - y.max(1e-10).log10();
            acc += d * d;
        }
        total += (acc / fa.len() as f64).sqrt();
    }
    total / pa.len() as f64
}
