//! Speech recovery from radar vibration traces.
//!
//! The crate simulates a loudspeaker observed by a 77 GHz-class FMCW radar
//! as a band-limited 5.1 kHz phase trace, maps the trace's log-Mel
//! spectrogram to the speech log-Mel spectrogram with a convolutional
//! encoder/decoder that has a Transformer bottleneck and frequency
//! transformation layers, and resynthesizes waveforms with Griffin-Lim or
//! iSTFT for evaluation with LSD and STOI.

pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
