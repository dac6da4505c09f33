mod support;

use rfspeech_core::model::*;
use rfspeech_core::nn::{Bindings, Graph, ModelParams, Tensor};
use rfspeech_core::signal::{MelSpectrogram, Waveform};
use rfspeech_core::sim::{simulate_trace, synth::synthetic_clip, RadarConfig};
use support::{random_tensor, rng};

/// Parameters of one FTL site, built by hand.
fn ftl_params(c: usize, f: usize, seed: u64) -> ModelParams<f64> {
    let mut r = rng(seed);
    let mut p = ModelParams::new();
    for i in 1..=3 {
        p.insert(&format!("ftl.conv{i}.w"), random_tensor(&mut r, &[c, c, 3, 3], -0.4, 0.4)).unwrap();
        p.insert(&format!("ftl.conv{i}.b"), random_tensor(&mut r, &[c], -0.1, 0.1)).unwrap();
    }
    p.insert("ftl.w_tr", random_tensor(&mut r, &[f, f], -0.5, 0.5)).unwrap();
    p.insert("ftl.fuse.w", random_tensor(&mut r, &[c, 2 * c, 1, 1], -0.5, 0.5)).unwrap();
    p.insert("ftl.fuse.b", random_tensor(&mut r, &[c], -0.1, 0.1)).unwrap();
    p
}

fn run_ftl(p: &ModelParams<f64>, x: &Tensor<f64>) -> Tensor<f64> {
    let mut g = Graph::new();
    let b: Bindings = p.bind(&mut g).unwrap();
    let xv = g.constant(x.clone()).unwrap();
    let y = ftl_block(&mut g, &b, "ftl", xv).unwrap();
    g.value(y).clone()
}

#[test]
fn ftl_identity_construction_reproduces_input() {
    let (c, f, t) = (3, 8, 5);
    let mut p = ftl_params(c, f, 1);
    let eye: Vec<f64> = (0..f * f).map(|i| if i / f == i % f { 1.0 } else { 0.0 }).collect();
    p.get_mut("ftl.w_tr").unwrap().value = Tensor::from_f64(&[f, f], &eye).unwrap();
    // 1×1 fuse selecting the first operand (the block input).
    let mut sel = vec![0.0; c * 2 * c];
    for o in 0..c {
        sel[o * 2 * c + o] = 1.0;
    }
    p.get_mut("ftl.fuse.w").unwrap().value = Tensor::from_f64(&[c, 2 * c, 1, 1], &sel).unwrap();
    p.get_mut("ftl.fuse.b").unwrap().value = Tensor::zeros(&[c]);
    let x = random_tensor(&mut rng(2), &[1, c, f, t], -1.0, 1.0);
    assert_eq!(run_ftl(&p, &x), x);
}

#[test]
fn ftl_mixes_frequencies() {
    let (c, f, t) = (2, 8, 5);
    let p = ftl_params(c, f, 3);
    let x = random_tensor(&mut rng(4), &[1, c, f, t], 0.2, 1.0);
    let base = run_ftl(&p, &x);
    // Perturb frequency row i = 2 of channel 0 at every frame.
    let mut x2 = x.clone();
    for tt in 0..t {
        x2.data_mut()[2 * t + tt] += 0.5;
    }
    let moved = run_ftl(&p, &x2);
    let changed_rows: Vec<usize> = (0..f)
        .filter(|&j| j != 2)
        .filter(|&j| (0..t).any(|tt| (moved.data()[j * t + tt] - base.data()[j * t + tt]).abs() > 1e-9))
        .collect();
    assert!(changed_rows.len() >= f - 2, "only rows {changed_rows:?} respond");
}

#[test]
fn tokenization_contract() {
    let net = RadioUNet::new(RadioUNetConfig::default()).unwrap();
    assert_eq!(net.config().bottleneck_tokens(), 100);
    // Zero input and zero positional embedding give zero tokens.
    let mut p = net.init_params::<f32>(1).unwrap();
    p.get_mut("bottleneck.pos").unwrap().value = Tensor::zeros(&[100, 256]);
    let mut g = Graph::new();
    let b = p.bind(&mut g).unwrap();
    let x = g.constant(Tensor::zeros(&[1, 128, 10, 10])).unwrap();
    let tokens = net.tokenize(&mut g, &b, x).unwrap();
    assert_eq!(g.shape(tokens), [100, 256]);
    assert!(g.value(tokens).data().iter().all(|&v| v == 0.0));
    // Spatial flatten / unflatten are inverse.
    let x = random_tensor(&mut rng(5), &[2, 3, 10, 10], -1.0, 1.0);
    let mut g = Graph::new();
    let xv = g.constant(x.clone()).unwrap();
    let t = g.to_tokens(xv).unwrap();
    assert_eq!(g.shape(t), [200, 3]);
    let back = g.from_tokens(t, [2, 3, 10, 10]).unwrap();
    assert_eq!(g.value(back), &x);
}

fn tiny(bottleneck: Bottleneck) -> RadioUNet {
    RadioUNet::new(RadioUNetConfig {
        bottleneck,
        ..RadioUNetConfig::tiny()
    })
    .unwrap()
}

#[test]
fn forward_is_deterministic_and_ablation_changes_output() {
    let full = tiny(Bottleneck::Transformer);
    let ident = tiny(Bottleneck::Identity);
    let p = full.init_params::<f64>(9).unwrap();
    let x = random_tensor(&mut rng(6), &[1, 1, 16, 16], -1.0, 1.0);
    let y1 = full.predict(&p, &x).unwrap();
    let y2 = full.predict(&p, &x).unwrap();
    assert_eq!(y1, y2);
    assert_eq!(y1.shape(), [1, 1, 16, 16]);
    // The identity bottleneck ignores the Transformer parameters.
    let y3 = ident.predict(&p, &x).unwrap();
    let diff: f64 = y1.data().iter().zip(y3.data()).map(|(a, b)| (a - b).abs()).sum();
    assert!(diff > 1e-6, "ablation left the output unchanged");
}

#[test]
fn skips_carry_signal_through_a_zeroed_bottleneck() {
    let net = tiny(Bottleneck::Zero);
    let p = net.init_params::<f64>(10).unwrap();
    let a = net.predict(&p, &random_tensor(&mut rng(7), &[1, 1, 16, 16], -1.0, 1.0)).unwrap();
    let b = net.predict(&p, &random_tensor(&mut rng(8), &[1, 1, 16, 16], -1.0, 1.0)).unwrap();
    let diff: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    assert!(diff > 1e-6);
}

#[test]
fn wrong_input_size_is_rejected() {
    let net = tiny(Bottleneck::Transformer);
    let p = net.init_params::<f64>(1).unwrap();
    assert!(net.predict(&p, &Tensor::zeros(&[1, 1, 16, 8])).is_err());
    let bad = RadioUNetConfig {
        input_frames: 84,
        ..RadioUNetConfig::default()
    };
    assert!(RadioUNet::new(bad).is_err());
}

#[test]
fn param_count_is_a_function_of_config() {
    let a = RadioUNet::new(RadioUNetConfig::default()).unwrap();
    let b = RadioUNet::new(RadioUNetConfig::default()).unwrap();
    assert_eq!(a.param_count(), b.param_count());
    assert_eq!(a.param_count(), a.init_params::<f32>(3).unwrap().scalar_count());
    assert_ne!(a.param_count(), tiny(Bottleneck::Transformer).param_count());
}

#[test]
fn normalization_round_trip() {
    let v: Vec<f64> = (0..80 * 7).map(|i| -3.0 + (i as f64 * 0.37).sin()).collect();
    let m = MelSpectrogram::new(v, 7, false).unwrap();
    let stats = NormStats {
        rf_mean: -2.0,
        rf_std: 1.3,
        speech_mean: -1.1,
        speech_std: 3.4,
    };
    let back = stats.denormalize_speech(&stats.normalize_speech(&m).unwrap()).unwrap();
    for (a, b) in back.values().iter().zip(m.values()) {
        assert!((a - b).abs() < 1e-6);
    }
}

fn pairs(n: usize, secs: f64) -> Vec<MelPair> {
    let cfg = RadarConfig::default();
    (0..n)
        .map(|i| {
            let id = format!("p{i}");
            let speech = synthetic_clip(40 + i as u64, &id, secs).unwrap();
            let rf = simulate_trace(&speech, &cfg, &id).unwrap().trace;
            MelPair::from_waveforms(&id, &speech, &rf).unwrap()
        })
        .collect()
}

fn small_model() -> RadioUNetConfig {
    RadioUNetConfig {
        transformer_layers: 1,
        token_dim: 16,
        heads: 2,
        base_channels: 4,
        ..RadioUNetConfig::default()
    }
}

fn curve(pairs: &[MelPair], cfg: &TrainConfig, steps: u64) -> Vec<f32> {
    let stats = NormStats::fit(pairs).unwrap();
    let state = TrainingState::new(small_model(), stats, cfg.lr, cfg.seed).unwrap();
    let mut tr = Trainer::new(state, pairs, cfg).unwrap();
    (0..steps).map(|_| tr.step().unwrap()).collect()
}

#[test]
fn training_contracts() {
    let ps = pairs(2, 1.6);
    let zero_lr = TrainConfig {
        lr: 0.0,
        crop: CropPolicy::Fixed,
        ..TrainConfig::default()
    };
    let c = curve(&ps[..1], &zero_lr, 4);
    assert!(c.iter().all(|&v| v == c[0]), "{c:?}");
    let cfg = TrainConfig::default();
    assert_eq!(curve(&ps, &cfg, 4), curve(&ps, &cfg, 4));
    // Clips shorter than one crop are refused.
    let short = pairs(1, 0.9);
    let stats = NormStats::fit(&short).unwrap();
    let state = TrainingState::new(small_model(), stats, 0.01, 1).unwrap();
    assert!(Trainer::new(state, &short, &cfg).is_err());
    let state = TrainingState::new(small_model(), NormStats::fit(&ps).unwrap(), 0.01, 1).unwrap();
    assert!(Trainer::new(state, &[], &cfg).is_err());
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let ps = pairs(1, 1.4);
    let state = TrainingState::new(small_model(), NormStats::fit(&ps).unwrap(), 0.01, 3).unwrap();
    let path = tmp.path().join("a.ckpt");
    state.save(&path).unwrap();
    let back = TrainingState::load(&path).unwrap();
    assert_eq!(back, state);
    let again = tmp.path().join("b.ckpt");
    back.save(&again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

fn rf_of_seconds(secs: f64) -> Waveform {
    let speech = synthetic_clip(77, "w", secs).unwrap();
    simulate_trace(&speech, &RadarConfig::default(), "w").unwrap().trace
}

#[test]
fn inference_window_arithmetic() {
    let ps = pairs(1, 1.4);
    let state = TrainingState::new(small_model(), NormStats::fit(&ps).unwrap(), 0.01, 3).unwrap();
    let one = infer(&state, &rf_of_seconds(1.28)).unwrap();
    assert_eq!((one.n_bands(), one.n_frames()), (80, 80));
    let long = infer(&state, &rf_of_seconds(2.56)).unwrap();
    assert_eq!(long.n_frames(), 160);
    assert_eq!(window_starts(160, 80).unwrap().len(), 3);
    assert!(infer(&state, &rf_of_seconds(1.0)).is_err());
}
