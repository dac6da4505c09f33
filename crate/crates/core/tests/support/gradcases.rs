//! Finite-difference cases for every differentiable op.

use super::{away_from_zero, grad_check, random_tensor, rng, weighted_sum};
use rfspeech_core::nn::{AttentionWeights, Tensor};

/// Element-wise relative error tolerance at op level.
pub const OP_TOL: f64 = 1e-4;

/// Worst relative error per op.
pub fn all() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    elementwise_ops(&mut out);
    linear_and_softmax(&mut out);
    layer_norm(&mut out);
    conv2d_both_strides(&mut out);
    pixel_shuffle_and_tokens(&mut out);
    l1_loss(&mut out);
    freq_transform(&mut out);
    attention_core_and_multihead(&mut out);
    out
}

fn elementwise_ops(out: &mut Vec<(&'static str, f64)>) {
    let mut r = rng(1);
    let a = random_tensor(&mut r, &[3, 4], -1.0, 1.0);
    let b = random_tensor(&mut r, &[3, 4], -1.0, 1.0);
    out.push(("add", grad_check(&[a.clone(), b.clone()], |g, v| {
        let y = g.add(v[0], v[1])?;
        weighted_sum(g, y, 1)
    })));
    out.push(("mul", grad_check(&[a.clone(), b.clone()], |g, v| {
        let y = g.mul(v[0], v[1])?;
        weighted_sum(g, y, 2)
    })));
    out.push(("scale", grad_check(std::slice::from_ref(&a), |g, v| {
        let y = g.scale(v[0], -1.7)?;
        weighted_sum(g, y, 3)
    })));
    out.push(("gelu", grad_check(std::slice::from_ref(&a), |g, v| {
        let y = g.gelu(v[0])?;
        weighted_sum(g, y, 4)
    })));
    let c = away_from_zero(&mut r, &[3, 4]);
    out.push(("relu", grad_check(&[c], |g, v| {
        let y = g.relu(v[0])?;
        weighted_sum(g, y, 5)
    })));
    out.push(("mean", grad_check(std::slice::from_ref(&a), |g, v| {
        let sq = g.mul(v[0], v[0])?;
        g.mean(sq)
    })));
    let rows = random_tensor(&mut r, &[2, 4], -1.0, 1.0);
    let tall = random_tensor(&mut r, &[6, 4], -1.0, 1.0);
    out.push(("add_rows", grad_check(&[tall, rows], |g, v| {
        let y = g.add_rows(v[0], v[1])?;
        weighted_sum(g, y, 6)
    })));
}

fn linear_and_softmax(out: &mut Vec<(&'static str, f64)>) {
    let mut r = rng(2);
    let x = random_tensor(&mut r, &[2, 3, 5], -1.0, 1.0);
    let w = random_tensor(&mut r, &[5, 4], -1.0, 1.0);
    let b = random_tensor(&mut r, &[4], -1.0, 1.0);
    out.push(("linear", grad_check(&[x.clone(), w, b], |g, v| {
        let y = g.linear(v[0], v[1], Some(v[2]))?;
        weighted_sum(g, y, 7)
    })));
    out.push(("softmax", grad_check(&[x], |g, v| {
        let y = g.softmax(v[0])?;
        weighted_sum(g, y, 8)
    })));
}

fn layer_norm(out: &mut Vec<(&'static str, f64)>) {
    let mut r = rng(3);
    let x = random_tensor(&mut r, &[4, 6], -2.0, 2.0);
    let gamma = random_tensor(&mut r, &[6], 0.5, 1.5);
    let beta = random_tensor(&mut r, &[6], -0.5, 0.5);
    out.push(("layer_norm", grad_check(&[x, gamma, beta], |g, v| {
        let y = g.layer_norm(v[0], v[1], v[2])?;
        weighted_sum(g, y, 9)
    })));
}

fn conv2d_both_strides(out: &mut Vec<(&'static str, f64)>) {
    let mut r = rng(4);
    for (stride, h, w) in [(1, 5, 4), (2, 5, 6), (2, 4, 4)] {
        let x = random_tensor(&mut r, &[2, 3, h, w], -1.0, 1.0);
        let k = random_tensor(&mut r, &[2, 3, 3, 3], -1.0, 1.0);
        let b = random_tensor(&mut r, &[2], -1.0, 1.0);
        out.push(("conv2d", grad_check(&[x, k, b], |g, v| {
            let y = g.conv2d(v[0], v[1], Some(v[2]), stride)?;
            weighted_sum(g, y, 10)
        })));
    }
    let x = random_tensor(&mut r, &[1, 4, 3, 3], -1.0, 1.0);
    let k = random_tensor(&mut r, &[2, 4, 1, 1], -1.0, 1.0);
    out.push(("conv2d 1x1", grad_check(&[x, k], |g, v| {
        let y = g.conv2d(v[0], v[1], None, 1)?;
        weighted_sum(g, y, 11)
    })));
}

fn pixel_shuffle_and_tokens(out: &mut Vec<(&'static str, f64)>) {
    let mut r = rng(5);
    let x = random_tensor(&mut r, &[2, 8, 2, 3], -1.0, 1.0);
    out.push(("pixel_shuffle", grad_check(std::slice::from_ref(&x), |g, v| {
        let y = g.pixel_shuffle(v[0], 2)?;
        weighted_sum(g, y, 12)
    })));
    out.push(("to_tokens", grad_check(std::slice::from_ref(&x), |g, v| {
        let y = g.to_tokens(v[0])?;
        weighted_sum(g, y, 13)
    })));
    let t = random_tensor(&mut r, &[12, 8], -1.0, 1.0);
    out.push(("from_tokens", grad_check(&[t], |g, v| {
        let y = g.from_tokens(v[0], [2, 8, 2, 3])?;
        weighted_sum(g, y, 14)
    })));
    let y = random_tensor(&mut r, &[2, 3, 2, 3], -1.0, 1.0);
    out.push(("concat", grad_check(&[x, y], |g, v| {
        let y = g.concat_channels(&[v[0], v[1]])?;
        weighted_sum(g, y, 15)
    })));
}

fn l1_loss(out: &mut Vec<(&'static str, f64)>) {
    let mut r = rng(6);
    let a = random_tensor(&mut r, &[3, 5], -1.0, 1.0);
    // Keep |a - b| ≥ 0.1 so no element sits on the kink.
    let off = away_from_zero(&mut r, &[3, 5]);
    let b_data: Vec<f64> = a.data().iter().zip(off.data()).map(|(x, o)| x + o).collect();
    let b = Tensor::from_f64(&[3, 5], &b_data).unwrap();
    out.push(("l1_loss", grad_check(&[a, b], |g, v| g.l1_loss(v[0], v[1]))));
}

fn freq_transform(out: &mut Vec<(&'static str, f64)>) {
    let mut r = rng(7);
    let x = random_tensor(&mut r, &[2, 2, 6, 4], -1.0, 1.0);
    let w = random_tensor(&mut r, &[6, 6], -1.0, 1.0);
    out.push(("freq_transform", grad_check(&[x, w], |g, v| {
        let y = g.freq_transform(v[0], v[1])?;
        weighted_sum(g, y, 16)
    })));
}

fn attention_core_and_multihead(out: &mut Vec<(&'static str, f64)>) {
    let mut r = rng(8);
    let q = random_tensor(&mut r, &[8, 6], -1.0, 1.0);
    let k = random_tensor(&mut r, &[8, 6], -1.0, 1.0);
    let v = random_tensor(&mut r, &[8, 6], -1.0, 1.0);
    out.push(("attention", grad_check(&[q.clone(), k, v], |g, vars| {
        let y = g.attention(vars[0], vars[1], vars[2], 2, 3)?;
        weighted_sum(g, y, 17)
    })));
    let mut inputs = vec![q];
    for _ in 0..4 {
        inputs.push(random_tensor(&mut r, &[6, 6], -0.8, 0.8));
        inputs.push(random_tensor(&mut r, &[6], -0.2, 0.2));
    }
    out.push(("multihead_attention", grad_check(&inputs, |g, v| {
        let w = AttentionWeights {
            wq: v[1],
            bq: v[2],
            wk: v[3],
            bk: v[4],
            wv: v[5],
            bv: v[6],
            wo: v[7],
            bo: v[8],
        };
        let y = g.multihead_attention(v[0], &w, 2, 2)?;
        weighted_sum(g, y, 18)
    })));
}

/// Relative error tolerance for whole-model checks.
pub const MODEL_TOL: f64 = 1e-3;

/// Compare d(L1)/dθ against central differences for `samples` randomly
/// drawn scalar parameters of the tiny model. Returns the worst relative
/// error and the probed parameter names.
pub fn tiny_model(seed: u64, samples: usize) -> (f64, Vec<String>) {
    use super::{FD_FLOOR, FD_STEP};
    use rand::RngExt;
    use rfspeech_core::model::{RadioUNet, RadioUNetConfig};
    use rfspeech_core::nn::{Graph, ModelParams};

    let net = RadioUNet::new(RadioUNetConfig::tiny()).unwrap();
    let cfg = net.config();
    let mut r = rng(seed);
    let mut params: ModelParams<f64> = net.init_params(seed).unwrap();
    let x = random_tensor(&mut r, &[1, 1, cfg.input_bands, cfg.input_frames], -1.0, 1.0);
    // Target sits ≥ 0.1 away from the initial output so the L1 kink is
    // never crossed by a finite-difference probe.
    let y0 = net.predict(&params, &x).unwrap();
    let off = away_from_zero(&mut r, y0.shape());
    let target: Vec<f64> = y0.data().iter().zip(off.data()).map(|(a, b)| a + b).collect();
    let target = Tensor::from_f64(y0.shape(), &target).unwrap();

    let loss = |p: &ModelParams<f64>| -> f64 {
        let y: Tensor<f64> = net.predict(p, &x).unwrap();
        y.data().iter().zip(target.data()).map(|(a, b): (&f64, &f64)| (a - b).abs()).sum::<f64>() / y.len() as f64
    };
    let mut g = Graph::new();
    let b = params.bind(&mut g).unwrap();
    let xv = g.constant(x.clone()).unwrap();
    let out = net.forward(&mut g, &b, xv).unwrap().output;
    let t = g.constant(target.clone()).unwrap();
    let l = g.l1_loss(out, t).unwrap();
    g.backward(l).unwrap();
    params.absorb_grads(&g, &b);

    let paths: Vec<String> = params.iter().map(|(p, _)| p.to_string()).collect();
    let mut worst: f64 = 0.0;
    let mut probed = Vec::new();
    for _ in 0..samples {
        let path = &paths[r.random_range(0..paths.len())];
        let j = r.random_range(0..params.get(path).unwrap().value.len());
        let analytic = params.get(path).unwrap().grad.as_ref().map_or(0.0, |gr| gr[j]);
        let orig = params.get(path).unwrap().value.data()[j];
        params.get_mut(path).unwrap().value.data_mut()[j] = orig + FD_STEP;
        let up = loss(&params);
        params.get_mut(path).unwrap().value.data_mut()[j] = orig - FD_STEP;
        let down = loss(&params);
        params.get_mut(path).unwrap().value.data_mut()[j] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR);
        worst = worst.max(rel);
        probed.push(format!("{path}[{j}]"));
    }
    (worst, probed)
}
