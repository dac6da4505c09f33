#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfspeech_core::nn::{Graph, Tensor, Var};
use rfspeech_core::Result;

pub mod gradcases;
pub mod oracles;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_f64(shape, &data).unwrap()
}

/// Values in ±[0.1, 1): keeps relu inputs away from the kink.
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            let m = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    Tensor::from_f64(shape, &data).unwrap()
}

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const FD_FLOOR: f64 = 1e-6;

/// Scalarize `out` as Σ out ⊙ R with a fixed random R so every output
/// element carries a distinct weight.
pub fn weighted_sum(g: &mut Graph<f64>, out: Var, seed: u64) -> Result<Var> {
    let mut r = rng(seed ^ 0x5eed);
    let w = random_tensor(&mut r, g.shape(out), -1.0, 1.0);
    let w = g.constant(w)?;
    let p = g.mul(out, w)?;
    g.sum(p)
}

/// Worst element-wise relative error between backprop and central
/// differences over every input element.
pub fn grad_check<F>(inputs: &[Tensor<f64>], f: F) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let eval = |vals: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|t| g.param(t.clone()).unwrap()).collect();
        let loss = f(&mut g, &vars).unwrap();
        g.value(loss).data()[0]
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone()).unwrap()).collect();
    let loss = f(&mut g, &vars).unwrap();
    g.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    let mut vals = inputs.to_vec();
    for (i, &v) in vars.iter().enumerate() {
        let analytic = g.grad(v).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; inputs[i].len()]);
        for j in 0..inputs[i].len() {
            let orig = vals[i].data()[j];
            vals[i].data_mut()[j] = orig + FD_STEP;
            let up = eval(&vals);
            vals[i].data_mut()[j] = orig - FD_STEP;
            let down = eval(&vals);
            vals[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Deterministic pseudo-noise in [-0.5, 0.5), reproducible in any language.
pub fn lcg_noise(len: usize, seed: u64) -> Vec<f64> {
    (0..len as u64)
        .map(|n| ((n * 1_103_515_245 + 12_345 * seed) % (1 << 31)) as f64 / (1u64 << 31) as f64 - 0.5)
        .collect()
}

/// Two seconds of an amplitude-modulated harmonic tone at 8 kHz with a
/// silent gap, plus three degraded versions of it.
pub fn stoi_vectors() -> (Vec<f64>, [Vec<f64>; 3]) {
    use std::f64::consts::PI;
    let fs = 8000.0;
    let len = 16_000;
    let n1 = lcg_noise(len, 1);
    let mut x: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 / fs;
            let env = 0.5 + 0.5 * (2.0 * PI * 2.5 * t).sin();
            env * ((2.0 * PI * 180.0 * t).sin() + 0.5 * (2.0 * PI * 360.0 * t).sin() + 0.25 * (2.0 * PI * 1100.0 * t).sin())
                + 0.05 * n1[i]
        })
        .collect();
    x[6000..7000].iter_mut().for_each(|v| *v = 0.0);
    let n2 = lcg_noise(len, 2);
    let n3 = lcg_noise(len, 3);
    let y1 = x.iter().zip(&n2).map(|(a, b)| a + 0.3 * b).collect();
    let y2 = (0..len)
        .map(|i| 0.5 * x[i] + if i >= 40 { 0.3 * x[i - 40] } else { 0.0 })
        .collect();
    let y3 = (0..len)
        .map(|i| x[i.saturating_sub(3)..=i].iter().sum::<f64>() / 4.0 + 0.1 * n3[i])
        .collect();
    (x, [y1, y2, y3])
}
