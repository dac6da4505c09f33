use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::features::MelPair;
use super::net::RadioUNet;
use super::state::TrainingState;
use crate::error::{Error, Result};
use crate::nn::{Graph, Tensor};
use crate::signal::{MelSpectrogram, MEL_BANDS};
use crate::sim::clip_rng;

/// How training crops are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CropPolicy {
    /// Uniformly random clip and start frame per step.
    #[default]
    Random,
    /// Clips in order, always from frame 0.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: u64,
    pub lr: f32,
    pub batch_size: usize,
    /// Write a checkpoint every this many steps (0 disables).
    pub checkpoint_every: u64,
    pub crop: CropPolicy,
    /// Seeds parameter initialization and crop sampling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 5000,
            lr: 0.01,
            batch_size: 1,
            checkpoint_every: 1000,
            crop: CropPolicy::Random,
            seed: 17,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr must be a non-negative number, got {}", self.lr)));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub l1_loss: f32,
    pub wall_ms: u64,
}

/// Normalized, aligned training examples.
struct Example {
    rf: MelSpectrogram,
    speech: MelSpectrogram,
}

/// SGD loop over a fixed set of clips.
pub struct Trainer {
    net: RadioUNet,
    state: TrainingState,
    examples: Vec<Example>,
    batch_size: usize,
    crop: CropPolicy,
}

impl Trainer {
    /// `pairs` are raw features; they are normalized with the state's
    /// statistics.
    pub fn new(state: TrainingState, pairs: &[MelPair], cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let net = state.network()?;
        if pairs.is_empty() {
            return Err(Error::EmptyCorpus("no training clips".into()));
        }
        let frames = net.config().input_frames;
        if net.config().input_bands != MEL_BANDS {
            return Err(Error::InvalidArgument(format!(
                "training on Mel features needs input_bands = {MEL_BANDS}"
            )));
        }
        let mut examples = Vec::with_capacity(pairs.len());
        for p in pairs {
            if p.n_frames() < frames {
                return Err(Error::TooShort {
                    got: p.n_frames(),
                    need: frames,
                });
            }
            examples.push(Example {
                rf: state.stats.normalize_rf(&p.rf)?,
                speech: state.stats.normalize_speech(&p.speech)?,
            });
        }
        Ok(Trainer {
            net,
            state,
            examples,
            batch_size: cfg.batch_size,
            crop: cfg.crop,
        })
    }

    pub fn state(&self) -> &TrainingState {
        &self.state
    }

    pub fn into_state(self) -> TrainingState {
        self.state
    }

    pub fn set_lr(&mut self, lr: f32) {
        self.state.lr = lr;
    }

    /// Input and target batches for step `step` (1-based); a pure function
    /// of the seed and step index.
    pub fn batch(&self, step: u64) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let frames = self.net.config().input_frames;
        let mut rng = clip_rng(self.state.seed, &format!("step{step}"));
        let mut input = Vec::with_capacity(self.batch_size * MEL_BANDS * frames);
        let mut target = Vec::with_capacity(input.capacity());
        for i in 0..self.batch_size {
            let (idx, start) = match self.crop {
                CropPolicy::Random => {
                    let idx = rng.random_range(0..self.examples.len());
                    let start = rng.random_range(0..=self.examples[idx].speech.n_frames() - frames);
                    (idx, start)
                }
                CropPolicy::Fixed => {
                    let k = (step - 1) as usize * self.batch_size + i;
                    (k % self.examples.len(), 0)
                }
            };
            let ex = &self.examples[idx];
            input.extend(ex.rf.crop(start, frames)?.values().iter().map(|&v| v as f32));
            target.extend(ex.speech.crop(start, frames)?.values().iter().map(|&v| v as f32));
        }
        let shape = [self.batch_size, 1, MEL_BANDS, frames];
        Ok((Tensor::new(&shape, input)?, Tensor::new(&shape, target)?))
    }

    /// One SGD step; returns the loss before the update.
    pub fn step(&mut self) -> Result<f32> {
        let n = self.state.step + 1;
        let (input, target) = self.batch(n)?;
        let mut g = Graph::new();
        let b = self.state.params.bind(&mut g)?;
        let x = g.constant(input)?;
        let y = g.constant(target)?;
        let out = self.net.forward(&mut g, &b, x)?.output;
        let loss = g.l1_loss(out, y)?;
        g.backward(loss)?;
        let value = g.value(loss).data()[0];
        self.state.params.absorb_grads(&g, &b);
        self.state.params.sgd_step(self.state.lr)?;
        self.state.step = n;
        Ok(value)
    }

    /// Run `steps` further steps, reporting each one.
    pub fn run(&mut self, steps: u64, mut on_step: impl FnMut(&StepRecord, &TrainingState) -> Result<()>) -> Result<()> {
        let start = Instant::now();
        for _ in 0..steps {
            let l1_loss = self.step()?;
            let rec = StepRecord {
                step: self.state.step,
                l1_loss,
                wall_ms: start.elapsed().as_millis() as u64,
            };
            on_step(&rec, &self.state)?;
        }
        Ok(())
    }
}

pub const LOSS_CSV_HEADER: &str = "step,l1_loss,wall_ms";

/// Append-only training log.
pub struct LossLog {
    file: std::io::BufWriter<std::fs::File>,
    path: std::path::PathBuf,
}

impl LossLog {
    /// Create the log; when `append` is set an existing file is extended.
    pub fn open(path: &Path, append: bool) -> Result<Self> {
        let exists = path.exists();
        let file = std::fs::OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut log = LossLog {
            file: std::io::BufWriter::new(file),
            path: path.to_path_buf(),
        };
        if !(append && exists) {
            log.write_line(LOSS_CSV_HEADER)?;
        }
        Ok(log)
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn record(&mut self, r: &StepRecord) -> Result<()> {
        self.write_line(&format!("{},{},{}", r.step, r.l1_loss, r.wall_ms))
    }
}

/// Parse a training log into (step, loss) rows.
pub fn read_loss_csv(path: &Path) -> Result<Vec<(u64, f32)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut offset = 0u64;
    for (i, line) in text.lines().enumerate() {
        let line_offset = offset;
        offset += line.len() as u64 + 1;
        if i == 0 {
            if line.trim() != LOSS_CSV_HEADER {
                return Err(Error::Malformed {
                    what: "loss log",
                    offset: 0,
                    reason: format!("expected header {LOSS_CSV_HEADER:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let parsed = (|| {
            let step = it.next()?.trim().parse().ok()?;
            let loss: f32 = it.next()?.trim().parse().ok()?;
            loss.is_finite().then_some((step, loss))
        })();
        match parsed {
            Some(r) => rows.push(r),
            None => {
                return Err(Error::Malformed {
                    what: "loss log",
                    offset: line_offset,
                    reason: format!("bad row {line:?}"),
                })
            }
        }
    }
    Ok(rows)
}
