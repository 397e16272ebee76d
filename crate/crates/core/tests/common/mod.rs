//! Shared fixtures for integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use prunemt::compress::{train, TrainConfig};
use prunemt::corpus::*;
use prunemt::lang::LangCode;
use prunemt::model::params::{DecoderLayer, EncoderLayer};
use prunemt::model::{ModelConfig, Side, TranslationModel, Vocab};
use prunemt::numerics::{Scalar, SeededRng};

pub fn lang(s: &str) -> LangCode {
    s.parse().unwrap()
}

pub struct Toy {
    pub corpus: SyntheticCorpus,
    pub model: TranslationModel<f32>,
}

/// eng<->swh cipher corpus and a 2-encoder/3-decoder model trained on it.
pub fn small_toy() -> &'static Toy {
    static TOY: OnceLock<Toy> = OnceLock::new();
    TOY.get_or_init(|| {
        let spec = ToyLanguageSpec { languages: vec![lang("swh_Latn")], ..Default::default() };
        let sizes = SplitSpec { train: 1000, dev: 30, devtest: 30, seed: 1 };
        let corpus = generate_synthetic_corpus(&spec, &sizes, &NoiseRates::default(), 1).unwrap();
        let vocab = Vocab::build(&corpus.languages(), corpus.texts());
        let cfg = ModelConfig { d_model: 32, n_heads: 4, ffn_dim: 64, n_encoder_layers: 2, n_decoder_layers: 3, max_positions: 64, ..ModelConfig::default() };
        let init = TranslationModel::<f32>::new(cfg, vocab, &SeededRng::new(1)).unwrap();
        let tc = TrainConfig {
            learning_rate: 2e-3,
            batch_size: 16,
            grad_accum_steps: 1,
            eval_every_steps: 100,
            early_stop_patience: 3,
            max_steps: Some(600),
            max_epochs: 100,
            ..TrainConfig::default()
        };
        let (model, _) = train(&init, &corpus.train, &corpus.dev, &tc).unwrap();
        Toy { corpus, model }
    })
}

/// A copy of `layer` whose residual branches output exactly zero.
pub fn zero_branches_dec<T: Scalar>(mut l: DecoderLayer<prunemt::numerics::Tensor<T>>) -> DecoderLayer<prunemt::numerics::Tensor<T>> {
    for t in [&mut l.self_attn.wo, &mut l.self_attn.bo, &mut l.cross_attn.wo, &mut l.cross_attn.bo, &mut l.ffn.w2, &mut l.ffn.b2] {
        t.data_mut().iter_mut().for_each(|x| *x = T::zero());
    }
    l
}

pub fn zero_branches_enc<T: Scalar>(mut l: EncoderLayer<prunemt::numerics::Tensor<T>>) -> EncoderLayer<prunemt::numerics::Tensor<T>> {
    for t in [&mut l.self_attn.wo, &mut l.self_attn.bo, &mut l.ffn.w2, &mut l.ffn.b2] {
        t.data_mut().iter_mut().for_each(|x| *x = T::zero());
    }
    l
}

/// Inserts pass-through layers so that they end up at the given final stack
/// positions; origins are renumbered to stack order.
pub fn with_identity_layers<T: Scalar>(model: &TranslationModel<T>, side: Side, positions: &[usize]) -> TranslationModel<T> {
    let mut params = model.params().clone();
    let mut cfg = model.config().clone();
    match side {
        Side::Decoder => {
            for &p in positions {
                let template = zero_branches_dec(params.decoder[0].clone());
                params.decoder.insert(p, template);
            }
            params.decoder.iter_mut().enumerate().for_each(|(i, l)| l.origin = i);
            cfg.n_decoder_layers = params.decoder.len();
        }
        Side::Encoder => {
            for &p in positions {
                let template = zero_branches_enc(params.encoder[0].clone());
                params.encoder.insert(p, template);
            }
            params.encoder.iter_mut().enumerate().for_each(|(i, l)| l.origin = i);
            cfg.n_encoder_layers = params.encoder.len();
        }
    }
    TranslationModel::from_parts(cfg, model.vocab().clone(), params, model.precision()).unwrap()
}

pub fn tiny_model(enc: usize, dec: usize, seed: u64) -> TranslationModel<f32> {
    let langs = [lang("eng_Latn"), lang("swh_Latn")];
    let vocab = Vocab::build(&langs, ["abcdefghijklmnopqrstuvwxyz "]);
    let cfg = ModelConfig { d_model: 8, n_heads: 2, ffn_dim: 12, n_encoder_layers: enc, n_decoder_layers: dec, max_positions: 48, ..ModelConfig::default() };
    TranslationModel::new(cfg, vocab, &SeededRng::new(seed)).unwrap()
}

pub fn rec(s: &str, t: &str) -> ParallelRecord {
    ParallelRecord::new(lang("eng_Latn"), lang("swh_Latn"), s, t, "test")
}

/// A tiny model that emits eos first whatever the input.
pub fn mute_model() -> TranslationModel<f32> {
    let mut m = tiny_model(1, 1, 2);
    let p = m.params_mut();
    p.decoder_norm.gain.data_mut().iter_mut().for_each(|x| *x = 0.0);
    p.decoder_norm.bias.data_mut().iter_mut().for_each(|x| *x = 1.0);
    let d = 8;
    let eos = prunemt::model::vocab::EOS;
    p.embedding.data_mut()[eos * d..(eos + 1) * d].iter_mut().for_each(|x| *x = 100.0);
    m
}
