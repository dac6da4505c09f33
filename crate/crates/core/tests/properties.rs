use proptest::prelude::*;
use rfspeech_core::model::{cross_fade, window_starts};
use rfspeech_core::nn::{pixel_unshuffle, Graph, ModelParams, Tensor};
use rfspeech_core::signal::MatrixDump;
use rfspeech_core::sim::{unwrap_phase, wrap_phase};
use std::f64::consts::PI;

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    let mut g = Graph::new();
    let av = g.constant(Tensor::from_f64(&[a.len()], a).unwrap()).unwrap();
    let bv = g.constant(Tensor::from_f64(&[b.len()], b).unwrap()).unwrap();
    let l = g.l1_loss(av, bv).unwrap();
    g.value(l).data()[0]
}

proptest! {
    #[test]
    fn l1_is_a_symmetric_nonnegative_distance((a, b) in (1usize..40).prop_flat_map(|n| (vec_of(n), vec_of(n)))) {
        let (ab, ba) = (l1(&a, &b), l1(&b, &a));
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(l1(&a, &a), 0.0);
    }

    #[test]
    fn pixel_shuffle_is_a_bijection(n in 1usize..3, c in 1usize..3, h in 1usize..4, w in 1usize..4, r in 1usize..4,
                                    seed in any::<u64>()) {
        let len = n * c * r * r * h * w;
        let data: Vec<f64> = (0..len).map(|i| (i as f64 + seed as f64 % 97.0).sin()).collect();
        let x = Tensor::from_f64(&[n, c * r * r, h, w], &data).unwrap();
        let mut g = Graph::new();
        let xv = g.constant(x.clone()).unwrap();
        let y = g.pixel_shuffle(xv, r).unwrap();
        prop_assert_eq!(g.shape(y), &[n, c, h * r, w * r][..]);
        let mut sorted_in = data.clone();
        let mut sorted_out = g.value(y).data().to_vec();
        sorted_in.sort_by(f64::total_cmp);
        sorted_out.sort_by(f64::total_cmp);
        prop_assert_eq!(sorted_in, sorted_out);
        prop_assert_eq!(pixel_unshuffle(g.value(y), r).unwrap(), x);
    }

    #[test]
    fn unwrap_inverts_wrap_for_small_steps(start in -20.0f64..20.0, steps in prop::collection::vec(-3.0f64..3.0, 1..200)) {
        let mut phi = vec![start];
        for s in &steps {
            phi.push(phi[phi.len() - 1] + s);
        }
        let wrapped: Vec<f64> = phi.iter().map(|&p| wrap_phase(p)).collect();
        prop_assert!(wrapped.iter().all(|w| *w > -PI && *w <= PI));
        let back = unwrap_phase(&wrapped);
        let shift = back[0] - phi[0];
        prop_assert!((shift / (2.0 * PI) - (shift / (2.0 * PI)).round()).abs() < 1e-9);
        for (b, p) in back.iter().zip(&phi) {
            prop_assert!((b - p - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn windows_cover_every_frame(win in 2usize..100, extra in 0usize..400) {
        let frames = win + extra;
        let starts = window_starts(frames, win).unwrap();
        prop_assert_eq!(starts[0], 0);
        prop_assert_eq!(*starts.last().unwrap(), frames - win);
        prop_assert!(starts.windows(2).all(|p| p[0] < p[1] && p[1] - p[0] <= win / 2));
    }

    #[test]
    fn cross_fade_stays_within_window_values(win in 2usize..40, extra in 0usize..80, bands in 1usize..4,
                                             vals in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let frames = win + extra;
        let starts = window_starts(frames, win).unwrap();
        let windows: Vec<(usize, Vec<f64>)> = starts
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, vec![vals[i % vals.len()]; bands * win]))
            .collect();
        let lo = windows.iter().map(|w| w.1[0]).fold(f64::INFINITY, f64::min);
        let hi = windows.iter().map(|w| w.1[0]).fold(f64::NEG_INFINITY, f64::max);
        let out = cross_fade(&windows, bands, win, frames);
        prop_assert_eq!(out.len(), bands * frames);
        prop_assert!(out.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
    }

    #[test]
    fn checkpoint_bytes_round_trip(shapes in prop::collection::vec(prop::collection::vec(1usize..5, 0..4), 1..6)) {
        let mut p = ModelParams::<f32>::new();
        for (i, s) in shapes.iter().enumerate() {
            let n: usize = s.iter().product();
            let data: Vec<f32> = (0..n).map(|k| (k as f32 * 0.37 + i as f32).cos()).collect();
            p.insert(&format!("layer{i}.w"), Tensor::new(s, data).unwrap()).unwrap();
        }
        let bytes = p.to_checkpoint_bytes();
        let back = ModelParams::<f32>::from_checkpoint_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_checkpoint_bytes(), bytes.clone());
        prop_assert!(ModelParams::<f32>::from_checkpoint_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn mel_dump_round_trip(rows in 1usize..10, cols in 1usize..10, seed in any::<u32>()) {
        let data: Vec<f32> = (0..rows * cols).map(|i| (i as f32 + seed as f32).sin()).collect();
        let d = MatrixDump { rows, cols, data };
        prop_assert_eq!(MatrixDump::from_bytes(&d.to_bytes()).unwrap(), d);
    }
}
