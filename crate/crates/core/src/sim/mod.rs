//! Paired (speech, radar slow-time trace) corpus synthesis.
//!
//! The forward model collapses the FMCW chain into the phase of the range
//! bin that holds the loudspeaker membrane: the membrane displacement is the
//! speech waveform low-passed to the radar's perception limit, and the phase
//! is `4π/λ · d(t)` plus a static clutter offset and white Gaussian phase
//! noise, sampled at the 5.1 kHz chirp rate.

mod config;
mod corpus;
mod filter;
mod rng;
mod simulate;
pub mod synth;

pub use config::{RadarConfig, SLOW_TIME_RATE_HZ};
pub use corpus::{
    build_corpus, build_corpus_from_clips, Corpus, CorpusClip, Manifest, ManifestEntry, Split,
    SplitFractions,
};
pub use filter::Butterworth4;
pub use rng::clip_rng;
pub use simulate::{simulate_trace, unwrap_phase, wrap_phase, RfTrace};
