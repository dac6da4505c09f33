//! Minimal reverse-mode autodiff over dense tensors.
//!
//! A [`Graph`] records every operation of one forward pass; `backward`
//! sweeps it in reverse. Parameters live in [`ModelParams`] and are bound
//! into a fresh graph per step.

mod attention;
mod conv;
mod graph;
mod layers;
mod params;
mod real;
mod tensor;

pub use conv::{conv_out_extent, pixel_unshuffle};
pub use graph::{Graph, Var};
pub use layers::AttentionWeights;
pub use params::{Bindings, Init, ModelParams, Param, ParamSpec, CHECKPOINT_MAGIC};
pub use real::Real;
pub use tensor::Tensor;
