use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::filter::Butterworth4;
use super::rng::clip_rng;
use super::{simulate_trace, RadarConfig};
use crate::error::{Error, Result};
use crate::signal::{resample_cubic_spline, wav, Waveform, SPEECH_RATE_HZ};

pub const MANIFEST_FILE: &str = "manifest.json";
const MIN_CLIP_S: f64 = 1.0;
const MAX_CLIP_S: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        if !(self.train >= 0.0 && self.test >= 0.0 && (self.train + self.test - 1.0).abs() < 1e-9)
        {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be non-negative and sum to 1, got {} / {}",
                self.train, self.test
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub duration_s: f64,
    pub rf_duration_s: f64,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RadarConfig,
    pub split: SplitFractions,
    /// Factor that maps raw phase (rad) to the unit-peak traces on disk.
    pub rf_scale: f64,
    pub clips: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn count(&self, split: Split) -> usize {
        self.clips.iter().filter(|c| c.split == split).count()
    }
}

/// Paths of one simulated pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusClip {
    pub id: String,
    pub split: Split,
    pub speech_path: PathBuf,
    pub rf_path: PathBuf,
}

impl CorpusClip {
    pub fn load(&self) -> Result<(Waveform, Waveform)> {
        Ok((wav::read(&self.speech_path)?, wav::read(&self.rf_path)?))
    }
}

/// A corpus on disk: `<root>/{train,test}/<id>/{speech.wav, rf.wav}` plus
/// `manifest.json`.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Corpus {
    pub fn load(root: &Path) -> Result<Corpus> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
        Ok(Corpus {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn clips(&self, split: Split) -> Vec<CorpusClip> {
        self.manifest
            .clips
            .iter()
            .filter(|c| c.split == split)
            .map(|c| {
                let dir = self.root.join(split.dir_name()).join(&c.id);
                CorpusClip {
                    id: c.id.clone(),
                    split,
                    speech_path: dir.join("speech.wav"),
                    rf_path: dir.join("rf.wav"),
                }
            })
            .collect()
    }
}

/// Bring a clip to 8 kHz; higher rates are low-passed below the new Nyquist
/// before the spline resampler.
fn to_speech_rate(w: Waveform) -> Result<Waveform> {
    let rate = w.sample_rate_hz();
    if (rate - SPEECH_RATE_HZ).abs() < 1e-9 {
        return Ok(w);
    }
    let w = if rate > SPEECH_RATE_HZ {
        let lp = Butterworth4::lowpass(0.45 * SPEECH_RATE_HZ, rate);
        Waveform::new(lp.filtfilt(w.samples()), rate)?
    } else {
        w
    };
    resample_cubic_spline(&w, SPEECH_RATE_HZ)
}

/// Build a corpus from every `*.wav` in `speech_dir`. Unreadable clips and
/// clips outside 1–10 s are skipped with a warning.
pub fn build_corpus(
    speech_dir: &Path,
    cfg: &RadarConfig,
    split: SplitFractions,
    out_root: &Path,
) -> Result<Manifest> {
    let entries = fs::read_dir(speech_dir).map_err(|e| Error::io(speech_dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(speech_dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            paths.push(path);
        }
    }
    paths.sort();
    let mut clips = Vec::new();
    for path in paths {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match wav::read_any_rate(&path).and_then(to_speech_rate) {
            Ok(w) if (MIN_CLIP_S..=MAX_CLIP_S).contains(&w.duration_s()) => clips.push((id, w)),
            Ok(w) => log::warn!(
                "skipping {}: duration {:.2} s outside {MIN_CLIP_S}-{MAX_CLIP_S} s",
                path.display(),
                w.duration_s()
            ),
            Err(e) => log::warn!("skipping unreadable clip: {e}"),
        }
    }
    if clips.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no usable WAV clips in {}",
            speech_dir.display()
        )));
    }
    build_corpus_from_clips(clips, cfg, split, out_root)
}

/// Simulate traces for in-memory 8 kHz clips and write the corpus.
pub fn build_corpus_from_clips(
    mut clips: Vec<(String, Waveform)>,
    cfg: &RadarConfig,
    split: SplitFractions,
    out_root: &Path,
) -> Result<Manifest> {
    cfg.validate()?;
    split.validate()?;
    if clips.is_empty() {
        return Err(Error::EmptyCorpus("no clips".into()));
    }
    clips.sort_by(|a, b| a.0.cmp(&b.0));
    for pair in clips.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::InvalidArgument(format!("duplicate clip id {}", pair[0].0)));
        }
    }

    let mut traces = Vec::with_capacity(clips.len());
    for (id, speech) in &clips {
        traces.push(simulate_trace(speech, cfg, id)?);
    }
    let peak = traces.iter().fold(0.0f64, |m, t| m.max(t.trace.peak()));
    let rf_scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };

    let mut order: Vec<usize> = (0..clips.len()).collect();
    order.shuffle(&mut clip_rng(cfg.rng_seed, "split"));
    let n_train = (clips.len() as f64 * split.train).round() as usize;
    let mut assignment = vec![Split::Test; clips.len()];
    for &i in &order[..n_train.min(clips.len())] {
        assignment[i] = Split::Train;
    }

    let mut entries = Vec::with_capacity(clips.len());
    for (((id, speech), trace), split_of) in clips.iter().zip(&traces).zip(&assignment) {
        let dir = out_root.join(split_of.dir_name()).join(id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        wav::write(&dir.join("speech.wav"), speech)?;
        wav::write(&dir.join("rf.wav"), &trace.trace.scaled(rf_scale)?)?;
        entries.push(ManifestEntry {
            id: id.clone(),
            duration_s: speech.duration_s(),
            rf_duration_s: trace.trace.duration_s(),
            split: *split_of,
        });
    }
    let manifest = Manifest {
        config: cfg.clone(),
        split,
        rf_scale,
        clips: entries,
    };
    let path = out_root.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
