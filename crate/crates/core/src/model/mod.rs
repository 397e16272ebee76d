//! Transformer encoder-decoder, decoding, layer surgery, fp16 storage and
//! checkpoints.

pub mod checkpoint;
pub mod config;
pub mod decode;
pub mod params;
pub mod quant;
pub mod search;
pub mod surgery;
pub mod transformer;
pub mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::ModelConfig;
pub use decode::{DecodeRequest, EncodedSource};
pub use quant::quantize_fp16;
pub use search::{Hypothesis, IncrementalScorer, SearchConfig};
pub use surgery::remove_layers;
pub use transformer::{Example, ModelParams, Precision, Side, TranslationModel};
pub use vocab::Vocab;
