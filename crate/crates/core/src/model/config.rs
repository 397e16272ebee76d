use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub max_positions: usize,
    pub dropout_rate: f64,
    pub vocab_size: usize,
}

impl Default for ModelConfig {
    /// 12 encoder and 12 decoder layers, the depth of the uncompressed baseline.
    fn default() -> Self {
        ModelConfig { d_model: 32, n_heads: 4, ffn_dim: 64, n_encoder_layers: 12, n_decoder_layers: 12, max_positions: 256, dropout_rate: 0.0, vocab_size: 0 }
    }
}

impl ModelConfig {
    pub const LAYER_NORM_EPS: f64 = 1e-5;

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::config(format!("d_model {} must be a positive multiple of n_heads {}", self.d_model, self.n_heads)));
        }
        if self.n_encoder_layers == 0 || self.n_decoder_layers == 0 {
            return Err(Error::config("each stack needs at least one layer"));
        }
        if self.ffn_dim == 0 || self.max_positions < 3 {
            return Err(Error::config("ffn_dim must be positive and max_positions at least 3"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!("dropout_rate {} outside [0, 1)", self.dropout_rate)));
        }
        if self.vocab_size < 5 {
            return Err(Error::config("vocab_size must cover the specials plus at least one token"));
        }
        Ok(())
    }
}
