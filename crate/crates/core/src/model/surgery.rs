//! Structural layer removal.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::transformer::{Side, TranslationModel};
use crate::numerics::Scalar;

/// Returns a copy of `model` without the layers at stack positions
/// `positions` on `side`. Surviving layers keep their weights and origin
/// indices; the layer count in the config shrinks accordingly.
pub fn remove_layers<T: Scalar>(model: &TranslationModel<T>, side: Side, positions: &[usize]) -> Result<TranslationModel<T>> {
    let n = model.layer_count(side);
    let drop: BTreeSet<usize> = positions.iter().copied().collect();
    if drop.len() != positions.len() {
        return Err(Error::invalid(format!("duplicate layer positions in {positions:?}")));
    }
    if let Some(&bad) = drop.iter().find(|&&p| p >= n) {
        return Err(Error::invalid(format!("{side} has {n} layers; position {bad} out of range")));
    }
    if drop.len() >= n {
        return Err(Error::invalid(format!("removing {} of {n} {side} layers leaves none", drop.len())));
    }
    let (mut config, vocab, mut params, precision) = model.clone().into_parts();
    match side {
        Side::Encoder => {
            params.encoder = params.encoder.into_iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, l)| l).collect();
            config.n_encoder_layers = params.encoder.len();
        }
        Side::Decoder => {
            params.decoder = params.decoder.into_iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, l)| l).collect();
            config.n_decoder_layers = params.decoder.len();
        }
    }
    TranslationModel::from_parts(config, vocab, params, precision)
}
