//! Objective quality metrics and the evaluation driver.

mod eval;
mod lsd;
mod stoi;

pub use eval::{evaluate, score, synthesize, ClipScore, EvalReport, Variant, VariantReport};
pub use lsd::{lsd, LENGTH_TOLERANCE};
pub use stoi::{resample_poly, stoi, stoi_samples, SEGMENT_FRAMES, STOI_RATE_HZ};
