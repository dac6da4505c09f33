use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{log_mel, resample_cubic_spline, stft, MelSpectrogram, Waveform, HOP, SPEECH_RATE_HZ};

/// Log-Mel features of an 8 kHz waveform with one frame per hop: the
/// trailing centred frame is dropped so `len / hop` frames remain.
pub fn speech_mel(w: &Waveform) -> Result<MelSpectrogram> {
    let m = log_mel(&stft(w)?)?;
    m.crop(0, w.len() / HOP)
}

/// The RF trace upsampled to the speech rate.
pub fn upsample_rf(rf: &Waveform) -> Result<Waveform> {
    resample_cubic_spline(rf, SPEECH_RATE_HZ)
}

/// Network input features of an RF trace.
pub fn rf_mel(rf: &Waveform) -> Result<MelSpectrogram> {
    speech_mel(&upsample_rf(rf)?)
}

/// Time-aligned raw (unnormalized) features of one clip.
#[derive(Clone, Debug, PartialEq)]
pub struct MelPair {
    pub id: String,
    pub rf: MelSpectrogram,
    pub speech: MelSpectrogram,
}

impl MelPair {
    /// Features of both signals, trimmed to the shorter frame count.
    pub fn from_waveforms(id: &str, speech: &Waveform, rf: &Waveform) -> Result<Self> {
        let (s, r) = (speech_mel(speech)?, rf_mel(rf)?);
        let n = s.n_frames().min(r.n_frames());
        Ok(MelPair {
            id: id.to_string(),
            rf: r.crop(0, n)?,
            speech: s.crop(0, n)?,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.speech.n_frames()
    }
}

/// Global log-Mel mean and standard deviation of the training split, one
/// pair for RF inputs and one for speech targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub rf_mean: f64,
    pub rf_std: f64,
    pub speech_mean: f64,
    pub speech_std: f64,
}

fn mean_std<'a>(mels: impl Iterator<Item = &'a MelSpectrogram> + Clone, what: &str) -> Result<(f64, f64)> {
    let n: usize = mels.clone().map(|m| m.values().len()).sum();
    if n == 0 {
        return Err(Error::EmptyCorpus(format!("no {what} frames for normalization")));
    }
    let mean = mels.clone().flat_map(|m| m.values()).sum::<f64>() / n as f64;
    let var = mels.flat_map(|m| m.values()).map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if !(std > 1e-8) {
        return Err(Error::InvalidArgument(format!("{what} features are constant")));
    }
    Ok((mean, std))
}

impl NormStats {
    pub fn fit(pairs: &[MelPair]) -> Result<Self> {
        let (rf_mean, rf_std) = mean_std(pairs.iter().map(|p| &p.rf), "rf")?;
        let (speech_mean, speech_std) = mean_std(pairs.iter().map(|p| &p.speech), "speech")?;
        Ok(NormStats {
            rf_mean,
            rf_std,
            speech_mean,
            speech_std,
        })
    }

    pub fn normalize_rf(&self, m: &MelSpectrogram) -> Result<MelSpectrogram> {
        m.normalize(self.rf_mean, self.rf_std)
    }

    pub fn normalize_speech(&self, m: &MelSpectrogram) -> Result<MelSpectrogram> {
        m.normalize(self.speech_mean, self.speech_std)
    }

    pub fn denormalize_speech(&self, m: &MelSpectrogram) -> Result<MelSpectrogram> {
        m.denormalize(self.speech_mean, self.speech_std)
    }
}

/// Features of every clip of one corpus split, in id order.
pub fn corpus_pairs(corpus: &crate::sim::Corpus, split: crate::sim::Split) -> Result<Vec<MelPair>> {
    let mut clips = corpus.clips(split);
    clips.sort_by(|a, b| a.id.cmp(&b.id));
    clips
        .iter()
        .map(|c| {
            let (speech, rf) = c.load()?;
            MelPair::from_waveforms(&c.id, &speech, &rf)
        })
        .collect()
}
