//! Multilingual translation model compression on a character-level
//! transformer: corpus handling, data filtering, training, layer pruning,
//! distillation, fp16 storage, metrics and throughput benchmarking.

pub mod bench;
pub mod compress;
pub mod corpus;
pub mod error;
pub mod filter;
pub mod lang;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod util;

pub use error::{Error, Result};
pub use lang::{Direction, LangCode};

/// Single-precision tensor, the training and inference default.
pub type Tensor32 = numerics::Tensor<f32>;
/// Single-precision model.
pub type Model = model::TranslationModel<f32>;
