use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{lsd, stoi};
use crate::error::{Error, Result};
use crate::model::{infer, upsample_rf, TrainingState};
use crate::signal::{griffin_lim, invert_mel, istft, stft, Waveform, HOP};
use crate::sim::{Corpus, CorpusClip, Split};

/// Waveform synthesis route being scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Recovered Mel → linear magnitude → Griffin-Lim.
    #[serde(rename = "griffinlim")]
    GriffinLim,
    /// Recovered Mel → linear magnitude, with the phase of the upsampled RF.
    #[serde(rename = "istft-rf-phase")]
    IstftRfPhase,
    /// The upsampled RF trace itself.
    #[serde(rename = "copy-input-baseline")]
    CopyInputBaseline,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::GriffinLim, Variant::IstftRfPhase, Variant::CopyInputBaseline];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::GriffinLim => "griffinlim",
            Variant::IstftRfPhase => "istft-rf-phase",
            Variant::CopyInputBaseline => "copy-input-baseline",
        }
    }

    fn needs_model(self) -> bool {
        self != Variant::CopyInputBaseline
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipScore {
    pub id: String,
    pub lsd: f64,
    pub stoi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub clips: Vec<ClipScore>,
    pub lsd_mean: f64,
    pub lsd_std: f64,
    pub stoi_mean: f64,
    pub stoi_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl VariantReport {
    /// Aggregate per-clip scores; clips are reduced in id order.
    pub fn from_clips(variant: Variant, mut clips: Vec<ClipScore>) -> Result<Self> {
        if clips.is_empty() {
            return Err(Error::EmptyCorpus("no clips to aggregate".into()));
        }
        clips.sort_by(|a, b| a.id.cmp(&b.id));
        let (lsd_mean, lsd_std) = mean_std(&clips.iter().map(|c| c.lsd).collect::<Vec<_>>());
        let (stoi_mean, stoi_std) = mean_std(&clips.iter().map(|c| c.stoi).collect::<Vec<_>>());
        Ok(VariantReport {
            variant,
            clips,
            lsd_mean,
            lsd_std,
            stoi_mean,
            stoi_std,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Training step of the evaluated checkpoint.
    pub step: u64,
    pub griffin_lim_iters: usize,
    pub variants: Vec<VariantReport>,
}

impl EvalReport {
    pub fn variant(&self, v: Variant) -> Option<&VariantReport> {
        self.variants.iter().find(|r| r.variant == v)
    }

    /// Rows are metrics, columns are variants.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for v in &self.variants {
            out.push(',');
            out.push_str(v.variant.tag());
        }
        out.push('\n');
        type Getter = fn(&VariantReport) -> f64;
        let rows: [(&str, Getter); 4] = [
            ("lsd", |v| v.lsd_mean),
            ("lsd_std", |v| v.lsd_std),
            ("stoi", |v| v.stoi_mean),
            ("stoi_std", |v| v.stoi_std),
        ];
        for (name, get) in rows {
            out.push_str(name);
            for v in &self.variants {
                out.push_str(&format!(",{:.6}", get(v)));
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::json(json_path, e))?;
        std::fs::write(json_path, json + "\n").map_err(|e| Error::io(json_path, e))?;
        std::fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))
    }
}

/// Synthesize the waveform of one variant from an RF trace.
pub fn synthesize(
    state: Option<&TrainingState>,
    rf: &Waveform,
    variant: Variant,
    gl_iters: usize,
) -> Result<Waveform> {
    let upsampled = upsample_rf(rf)?;
    if variant == Variant::CopyInputBaseline {
        return Ok(upsampled);
    }
    let state = state.ok_or_else(|| Error::InvalidArgument(format!("variant {variant} needs a trained model")))?;
    let mag = invert_mel(&infer(state, rf)?)?;
    match variant {
        Variant::GriffinLim => griffin_lim(&mag, gl_iters),
        Variant::IstftRfPhase => {
            let phase = stft(&upsampled.truncated((mag.n_frames() - 1) * HOP))?;
            istft(&phase.with_magnitude(&mag)?)
        }
        Variant::CopyInputBaseline => unreachable!(),
    }
}

/// LSD and STOI of one estimate against its reference, over the common
/// length.
pub fn score(id: &str, reference: &Waveform, estimate: &Waveform) -> Result<ClipScore> {
    let n = reference.len().min(estimate.len());
    let lsd = lsd(reference, estimate)?;
    let stoi = stoi(&reference.truncated(n), &estimate.truncated(n))?;
    if !(0.0..=1.0).contains(&stoi) {
        log::warn!("{id}: STOI {stoi} outside [0, 1]");
    }
    Ok(ClipScore {
        id: id.to_string(),
        lsd,
        stoi,
    })
}

/// Score every test clip under every requested variant, spreading clips
/// over up to `threads` workers. The report does not depend on `threads`.
pub fn evaluate(
    corpus: &Corpus,
    state: Option<&TrainingState>,
    variants: &[Variant],
    gl_iters: usize,
    threads: usize,
) -> Result<EvalReport> {
    let mut clips = corpus.clips(Split::Test);
    if clips.is_empty() {
        return Err(Error::EmptyCorpus("test split is empty".into()));
    }
    clips.sort_by(|a, b| a.id.cmp(&b.id));
    if state.is_none() && variants.iter().any(|v| v.needs_model()) {
        return Err(Error::InvalidArgument("evaluation needs a checkpoint".into()));
    }
    let score_clip = |clip: &CorpusClip| -> Result<Vec<ClipScore>> {
        let (speech, rf) = clip.load()?;
        variants
            .iter()
            .map(|&v| {
                let est = synthesize(state, &rf, v, gl_iters)?;
                let s = score(&clip.id, &speech, &est)?;
                log::info!("{} {v}: lsd {:.4} stoi {:.4}", clip.id, s.lsd, s.stoi);
                Ok(s)
            })
            .collect()
    };
    let workers = threads.clamp(1, clips.len());
    let per_clip: Vec<Result<Vec<ClipScore>>> = if workers == 1 {
        clips.iter().map(score_clip).collect()
    } else {
        let mut slots: Vec<Option<Result<Vec<ClipScore>>>> = (0..clips.len()).map(|_| None).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let clips = &clips;
                    let score_clip = &score_clip;
                    s.spawn(move || {
                        (w..clips.len())
                            .step_by(workers)
                            .map(|i| (i, score_clip(&clips[i])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("evaluation worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|r| r.expect("every clip scored")).collect()
    };
    let mut scores: Vec<Vec<ClipScore>> = vec![Vec::new(); variants.len()];
    for clip_scores in per_clip {
        for (i, s) in clip_scores?.into_iter().enumerate() {
            scores[i].push(s);
        }
    }
    let variants = variants
        .iter()
        .zip(scores)
        .map(|(&v, s)| VariantReport::from_clips(v, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        step: state.map_or(0, |s| s.step),
        griffin_lim_iters: gl_iters,
        variants,
    })
}
