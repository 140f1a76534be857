//! Joint phoneme and grapheme masked-language-model encoder.
//!
//! The pipeline goes text → word-aligned phoneme and subword streams
//! ([`frontend`]) → two-segment input sequence and masking ([`sequence`]) →
//! transformer encoder with a tied MLM head ([`encoder`]) → pre-training and
//! evaluation ([`pretrain`]) → phoneme-state extraction and fine-tuning for a
//! downstream model ([`adapter`]).
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for common uses.

pub mod adapter;
pub mod encoder;
pub mod error;
pub mod frontend;
pub mod pipeline;
pub mod pretrain;
pub mod rng;
pub mod scalar;
pub mod sequence;

pub use error::{Error, Result};
pub use pipeline::{Frontend, Prepared};
pub use scalar::Scalar;

pub type ModelParamsF32 = encoder::ModelParams<f32>;
pub type ModelParamsF64 = encoder::ModelParams<f64>;
pub type CheckpointF32 = encoder::Checkpoint<f32>;
pub type CheckpointF64 = encoder::Checkpoint<f64>;
pub type ForwardTraceF32 = encoder::ForwardTrace<f32>;
pub type ForwardTraceF64 = encoder::ForwardTrace<f64>;
pub type ToyHeadF32 = adapter::ToyHead<f32>;
