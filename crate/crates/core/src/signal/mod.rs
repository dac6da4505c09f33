//! Deterministic DSP kernels shared by the simulator, the model pipeline and
//! the metrics: spline resampling, STFT/iSTFT, log-Mel analysis and its
//! approximate inverse, Griffin-Lim phase retrieval, and file formats.

mod dump;
mod griffin_lim;
mod mel;
mod spline;
mod stft;
mod waveform;
pub mod wav;

pub use dump::{read_matrix_dump, write_matrix_dump, MatrixDump, MEL_DUMP_MAGIC};
pub use griffin_lim::{consistency_gap, griffin_lim, griffin_lim_with_trace, DEFAULT_GL_ITERS};
pub use mel::{
    hz_to_mel, invert_mel, log_mel, mel_filterbank, mel_to_hz, MelFilterbank, MelSpectrogram,
    LOG_FLOOR, MEL_BANDS, MEL_FMAX_HZ, MEL_FMIN_HZ,
};
pub use spline::resample_cubic_spline;
pub use stft::{istft, stft, Magnitude, Spectrogram, HOP, N_BINS, N_FFT};
pub use waveform::Waveform;

/// Sample rate of the speech side of the pipeline.
pub const SPEECH_RATE_HZ: f64 = 8000.0;
