use rustfft::{num_complex::Complex64, FftPlanner};
use rfspeech_core::sim::{build_corpus_from_clips, synth, Corpus, RadarConfig, Split, SplitFractions};
use std::fs;
use std::path::{Path, PathBuf};

fn build(root: &Path, n: usize, cfg: &RadarConfig) -> Corpus {
    let clips = synth::synthetic_clips(n, cfg.rng_seed).unwrap();
    build_corpus_from_clips(clips, cfg, SplitFractions::default(), root).unwrap();
    Corpus::load(root).unwrap()
}

/// Fraction of the one-sided power spectrum above `cutoff_hz`.
fn energy_above(x: &[f64], rate: f64, cutoff_hz: f64) -> f64 {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let n = buf.len();
    let (mut hi, mut total) = (0.0, 0.0);
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1) {
        let p = c.norm_sqr();
        total += p;
        if k as f64 * rate / n as f64 > cutoff_hz {
            hi += p;
        }
    }
    hi / total
}

#[test]
fn fifty_clip_corpus_alignment_and_band_limit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RadarConfig::default();
    let corpus = build(tmp.path(), 50, &cfg);
    assert_eq!(corpus.manifest.clips.len(), 50);
    assert_eq!((corpus.manifest.count(Split::Train), corpus.manifest.count(Split::Test)), (40, 10));
    let mut worst_gap: f64 = 0.0;
    let mut worst_leak: f64 = 0.0;
    for split in [Split::Train, Split::Test] {
        for clip in corpus.clips(split) {
            let (speech, rf) = clip.load().unwrap();
            assert_eq!(rf.sample_rate_hz(), 5100.0);
            let gap = (speech.len() as f64 / speech.sample_rate_hz() - rf.len() as f64 / rf.sample_rate_hz()).abs();
            worst_gap = worst_gap.max(gap);
            worst_leak = worst_leak.max(energy_above(rf.samples(), 5100.0, cfg.perception_cutoff_hz));
            let peak = rf.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(peak <= 1.0);
        }
    }
    assert!(worst_gap < 0.010, "duration mismatch {worst_gap} s");
    assert!(worst_leak < 0.05, "energy above cutoff {worst_leak}");
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn corpus_is_bit_identical_for_a_seed_and_differs_across_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RadarConfig::default();
    build(&tmp.path().join("a"), 6, &cfg);
    build(&tmp.path().join("b"), 6, &cfg);
    let a = tree(&tmp.path().join("a"));
    assert_eq!(a, tree(&tmp.path().join("b")));
    assert_eq!(a.len(), 6 * 2 + 1);
    let other = RadarConfig { rng_seed: 18, ..cfg };
    build(&tmp.path().join("c"), 6, &other);
    assert_ne!(a, tree(&tmp.path().join("c")));
}
