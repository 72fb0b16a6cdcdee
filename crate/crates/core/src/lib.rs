//! Hand landmark localization runtime.
//!
//! A compact encoder-decoder maps a 256x256 RGB hand crop to 21 landmark
//! heatmaps at 64x64. Around it sit the pieces needed to use it on video:
//! exponentially weighted box stabilization, crop/resample, peak decoding,
//! PCK/EPE/SSE metrics and mesh-to-annotation dataset tooling.
//!
//! The runnable programs under `examples/` walk through each part:
//! `kernels`, `forward_shapes`, `heatmap_roundtrip`, `stabilize_stream`,
//! `evaluate_metrics`, `generate_dataset` and `benchmark`.

pub mod annotations;
pub mod bench;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod heatmap;
pub mod image_io;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod render;
pub mod tensor;
pub mod tracking;
pub mod weights;

pub use error::{Error, Result};
pub use model::{build_fasthand, Model, ModelConfig, WeightSource};
