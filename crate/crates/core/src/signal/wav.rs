//! 16-bit PCM mono WAV files at the two rates the pipeline uses.

use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};

use super::Waveform;
use crate::error::{Error, Result};

pub const ACCEPTED_RATES_HZ: [u32; 2] = [5100, 8000];

fn wav_err(path: &Path, source: hound::Error) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        source,
    }
}

/// Read a mono 16-bit file at any rate. Corpus inputs may be at a higher rate
/// and are resampled by the caller.
pub fn read_any_rate(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != SampleFormat::Int
    {
        return Err(Error::InvalidArgument(format!(
            "{}: expected 16-bit PCM mono, got {} ch / {} bit",
            path.display(),
            spec.channels,
            spec.bits_per_sample
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(path, e))?;
    Waveform::new(samples, spec.sample_rate as f64)
}

/// Read a file, requiring one of the pipeline rates (5100 or 8000 Hz).
pub fn read(path: &Path) -> Result<Waveform> {
    let w = read_any_rate(path)?;
    let rate = w.sample_rate_hz() as u32;
    if !ACCEPTED_RATES_HZ.contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "{}: sample rate {rate} Hz not accepted (expected 5100 or 8000)",
            path.display()
        )));
    }
    Ok(w)
}

/// Write with clipping to [-1, 1] and rounding to 16 bits.
pub fn write(path: &Path, w: &Waveform) -> Result<()> {
    let rate = w.sample_rate_hz().round() as u32;
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &s in w.samples() {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let w = Waveform::new((0..600).map(|i| (i as f64 * 0.05).sin() * 0.8).collect(), 5100.0)
            .unwrap();
        write(&path, &w).unwrap();
        let back = read(&path).unwrap();
        assert_eq!(back.sample_rate_hz(), 5100.0);
        assert_eq!(back.len(), w.len());
        for (a, b) in w.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1.0 / 16000.0);
        }
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"RIFF");
    }

    #[test]
    fn unexpected_rate_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.wav");
        write(&path, &Waveform::zeros(100, 16000.0).unwrap()).unwrap();
        assert!(read(&path).is_err());
        assert!(read_any_rate(&path).is_ok());
    }
}
