//! The encoder-decoder model and its teacher-forced (training) forward pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::LangCode;
use crate::model::config::ModelConfig;
use crate::model::params::{Attention, DecoderLayer, EncoderLayer, FeedForward, Norm};
use crate::model::vocab::{Vocab, BOS, EOS, PAD};
use crate::numerics::{AttentionSpec, Graph, Scalar, SeededRng, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Encoder,
    Decoder,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Encoder => "encoder",
            Side::Decoder => "decoder",
        })
    }
}

/// How weights are stored. `F16` models hold only values exactly
/// representable in IEEE half precision and serialize them as 2-byte words;
/// arithmetic stays in the model's scalar type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F16,
}

/// Every parameter of the model in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<P> {
    pub embedding: P,
    pub encoder: Vec<EncoderLayer<P>>,
    pub encoder_norm: Norm<P>,
    pub decoder: Vec<DecoderLayer<P>>,
    pub decoder_norm: Norm<P>,
}

impl<P> ModelParams<P> {
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(String, &'a P)) {
        f("embedding".to_string(), &self.embedding);
        for (i, l) in self.encoder.iter().enumerate() {
            l.visit(&format!("encoder.{i}"), f);
        }
        self.encoder_norm.visit("encoder_norm", f);
        for (i, l) in self.decoder.iter().enumerate() {
            l.visit(&format!("decoder.{i}"), f);
        }
        self.decoder_norm.visit("decoder_norm", f);
    }

    pub fn visit_mut<'a>(&'a mut self, f: &mut dyn FnMut(String, &'a mut P)) {
        f("embedding".to_string(), &mut self.embedding);
        for (i, l) in self.encoder.iter_mut().enumerate() {
            l.visit_mut(&format!("encoder.{i}"), f);
        }
        self.encoder_norm.visit_mut("encoder_norm", f);
        for (i, l) in self.decoder.iter_mut().enumerate() {
            l.visit_mut(&format!("decoder.{i}"), f);
        }
        self.decoder_norm.visit_mut("decoder_norm", f);
    }

    pub fn try_map<Q>(&self, f: &mut dyn FnMut(&P) -> Result<Q>) -> Result<ModelParams<Q>> {
        Ok(ModelParams {
            embedding: f(&self.embedding)?,
            encoder: self.encoder.iter().map(|l| l.try_map(f)).collect::<Result<_>>()?,
            encoder_norm: self.encoder_norm.try_map(f)?,
            decoder: self.decoder.iter().map(|l| l.try_map(f)).collect::<Result<_>>()?,
            decoder_norm: self.decoder_norm.try_map(f)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TranslationModel<T> {
    config: ModelConfig,
    vocab: Vocab,
    params: ModelParams<Tensor<T>>,
    precision: Precision,
}

/// One teacher-forcing example in token ids.
///
/// Encoder input is `[src_tag] + src + [eos]`; decoder input is
/// `[tgt_tag, bos] + tgt`; targets are `[pad] + tgt + [eos]` with pad ignored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub encoder_input: Vec<usize>,
    pub decoder_input: Vec<usize>,
    pub targets: Vec<usize>,
}

impl Example {
    pub fn target_tokens(&self) -> usize {
        self.targets.len() - 1
    }
}

struct Init<'r> {
    rng: &'r mut SeededRng,
}

impl Init<'_> {
    fn uniform<T: Scalar>(&mut self, shape: &[usize], bound: f64) -> Tensor<T> {
        Tensor::from_fn(shape, |_| T::of((self.rng.uniform() * 2.0 - 1.0) * bound)).with_grad()
    }

    fn xavier<T: Scalar>(&mut self, fan_in: usize, fan_out: usize) -> Tensor<T> {
        self.uniform(&[fan_in, fan_out], (6.0 / (fan_in + fan_out) as f64).sqrt())
    }

    fn zeros<T: Scalar>(n: usize) -> Tensor<T> {
        Tensor::zeros(&[n]).with_grad()
    }

    fn norm<T: Scalar>(d: usize) -> Norm<Tensor<T>> {
        Norm { gain: Tensor::full(&[d], T::one()).with_grad(), bias: Self::zeros(d) }
    }

    fn attention<T: Scalar>(&mut self, d: usize) -> Attention<Tensor<T>> {
        Attention {
            wq: self.xavier(d, d),
            bq: Self::zeros(d),
            wk: self.xavier(d, d),
            bk: Self::zeros(d),
            wv: self.xavier(d, d),
            bv: Self::zeros(d),
            wo: self.xavier(d, d),
            bo: Self::zeros(d),
        }
    }

    fn ffn<T: Scalar>(&mut self, d: usize, f: usize) -> FeedForward<Tensor<T>> {
        FeedForward { w1: self.xavier(d, f), b1: Self::zeros(f), w2: self.xavier(f, d), b2: Self::zeros(d) }
    }
}

/// Sinusoidal position table, `[positions x d]`.
pub fn positional_encoding<T: Scalar>(positions: usize, d: usize) -> Vec<T> {
    let mut out = vec![T::zero(); positions * d];
    for pos in 0..positions {
        for i in 0..d / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
            out[pos * d + 2 * i] = T::of(angle.sin());
            out[pos * d + 2 * i + 1] = T::of(angle.cos());
        }
    }
    out
}

impl<T: Scalar> TranslationModel<T> {
    /// Randomly initialized model; `config.vocab_size` is taken from `vocab`.
    pub fn new(mut config: ModelConfig, vocab: Vocab, rng: &SeededRng) -> Result<Self> {
        config.vocab_size = vocab.len();
        config.validate()?;
        let d = config.d_model;
        let mut init = Init { rng: &mut rng.split("model-init") };
        let emb_bound = 3f64.sqrt() / (d as f64).sqrt();
        let embedding = init.uniform(&[vocab.len(), d], emb_bound);
        let encoder = (0..config.n_encoder_layers)
            .map(|origin| EncoderLayer { origin, self_norm: Init::norm(d), self_attn: init.attention(d), ffn_norm: Init::norm(d), ffn: init.ffn(d, config.ffn_dim) })
            .collect();
        let decoder = (0..config.n_decoder_layers)
            .map(|origin| DecoderLayer {
                origin,
                self_norm: Init::norm(d),
                self_attn: init.attention(d),
                cross_norm: Init::norm(d),
                cross_attn: init.attention(d),
                ffn_norm: Init::norm(d),
                ffn: init.ffn(d, config.ffn_dim),
            })
            .collect();
        let params = ModelParams { embedding, encoder, encoder_norm: Init::norm(d), decoder, decoder_norm: Init::norm(d) };
        Ok(TranslationModel { config, vocab, params, precision: Precision::F32 })
    }

    /// Assembles a model from parts, checking every invariant.
    pub fn from_parts(config: ModelConfig, vocab: Vocab, params: ModelParams<Tensor<T>>, precision: Precision) -> Result<Self> {
        config.validate()?;
        if config.vocab_size != vocab.len() {
            return Err(Error::config(format!("config vocab_size {} but vocab has {}", config.vocab_size, vocab.len())));
        }
        if params.encoder.len() != config.n_encoder_layers || params.decoder.len() != config.n_decoder_layers {
            return Err(Error::config("layer lists disagree with configured layer counts"));
        }
        let d = config.d_model;
        let f = config.ffn_dim;
        let mut bad = None;
        params.visit(&mut |name, t| {
            let want: Vec<usize> = expected_shape(&name, d, f, vocab.len());
            if bad.is_none() && (t.shape() != want.as_slice() || !t.is_finite()) {
                bad = Some(format!("parameter {name}: shape {:?} (want {want:?}) or non-finite values", t.shape()));
            }
        });
        if let Some(msg) = bad {
            return Err(Error::config(msg));
        }
        Ok(TranslationModel { config, vocab, params, precision })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &ModelParams<Tensor<T>> {
        &self.params
    }

    /// Mutable parameter access for fixtures and optimizers. Shapes must be
    /// kept; layer lists are only changed through layer removal.
    pub fn params_mut(&mut self) -> &mut ModelParams<Tensor<T>> {
        &mut self.params
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub(crate) fn set_precision(&mut self, p: Precision) {
        self.precision = p;
    }

    pub(crate) fn into_parts(self) -> (ModelConfig, Vocab, ModelParams<Tensor<T>>, Precision) {
        (self.config, self.vocab, self.params, self.precision)
    }

    pub fn layer_count(&self, side: Side) -> usize {
        match side {
            Side::Encoder => self.params.encoder.len(),
            Side::Decoder => self.params.decoder.len(),
        }
    }

    /// Original indices of the surviving layers on `side`, in stack order.
    pub fn layer_origins(&self, side: Side) -> Vec<usize> {
        match side {
            Side::Encoder => self.params.encoder.iter().map(|l| l.origin).collect(),
            Side::Decoder => self.params.decoder.iter().map(|l| l.origin).collect(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.params.visit(&mut |_, t| n += t.numel());
        n
    }

    pub fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        self.params.visit(&mut |name, t| out.push((name, t)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        self.params.visit_mut(&mut |_, t| out.push(t));
        out
    }

    pub fn zero_grad(&mut self) {
        self.params.visit_mut(&mut |_, t| t.zero_grad());
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.params.visit(&mut |_, t| ok &= t.is_finite());
        ok
    }

    pub fn cast<U: Scalar>(&self) -> TranslationModel<U> {
        TranslationModel {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: self.params.try_map(&mut |t| Ok(t.cast::<U>())).expect("cast is infallible"),
            precision: self.precision,
        }
    }

    pub fn check_length(&self, len: usize) -> Result<()> {
        if len > self.config.max_positions {
            return Err(Error::Overlength { len, max: self.config.max_positions });
        }
        Ok(())
    }

    /// Builds the teacher-forcing example for a sentence pair.
    pub fn example(&self, src_lang: &LangCode, src: &[usize], tgt_lang: &LangCode, tgt: &[usize]) -> Result<Example> {
        let mut encoder_input = Vec::with_capacity(src.len() + 2);
        encoder_input.push(self.vocab.lang_tag(src_lang)?);
        encoder_input.extend_from_slice(src);
        encoder_input.push(EOS);
        let mut decoder_input = Vec::with_capacity(tgt.len() + 2);
        decoder_input.push(self.vocab.lang_tag(tgt_lang)?);
        decoder_input.push(BOS);
        decoder_input.extend_from_slice(tgt);
        let mut targets = Vec::with_capacity(tgt.len() + 2);
        targets.push(PAD);
        targets.extend_from_slice(tgt);
        targets.push(EOS);
        self.check_length(encoder_input.len())?;
        self.check_length(decoder_input.len())?;
        Ok(Example { encoder_input, decoder_input, targets })
    }

    pub fn example_from_text(&self, src_lang: &LangCode, src: &str, tgt_lang: &LangCode, tgt: &str) -> Result<Example> {
        self.example(src_lang, &self.vocab.tokenize(src), tgt_lang, &self.vocab.tokenize(tgt))
    }

    /// Registers every parameter as a graph leaf.
    pub fn bind(&self, g: &mut Graph<T>) -> Result<ModelParams<Var>> {
        self.params.try_map(&mut |t| g.param(t))
    }

    /// Adds the gradients of `bound` into the stored parameters.
    pub fn accumulate_grads(&mut self, bound: &ModelParams<Var>, grads: &crate::numerics::Gradients<T>) -> Result<()> {
        let mut vars = Vec::new();
        bound.visit(&mut |_, v| vars.push(*v));
        let mut tensors = self.tensors_mut();
        for (v, t) in vars.into_iter().zip(tensors.iter_mut()) {
            grads.accumulate_into(v, t)?;
        }
        Ok(())
    }

    /// Teacher-forced logits `[batch * dec_len, vocab]` for a padded batch.
    pub fn batch_logits(&self, g: &mut Graph<T>, p: &ModelParams<Var>, batch: &[&Example], mut dropout: Option<&mut SeededRng>) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let d = self.config.d_model;
        let heads = self.config.n_heads;
        let rate = if dropout.is_some() { self.config.dropout_rate } else { 0.0 };
        let src_len = batch.iter().map(|e| e.encoder_input.len()).max().unwrap_or(0);
        let dec_len = batch.iter().map(|e| e.decoder_input.len()).max().unwrap_or(0);
        self.check_length(src_len)?;
        self.check_length(dec_len)?;
        let src_lens: Vec<usize> = batch.iter().map(|e| e.encoder_input.len()).collect();
        let dec_lens: Vec<usize> = batch.iter().map(|e| e.decoder_input.len()).collect();

        let mut x = self.embed(g, p, batch.iter().map(|e| e.encoder_input.as_slice()), src_len)?;
        let enc_spec = AttentionSpec { batch: batch.len(), q_len: src_len, k_len: src_len, heads, causal: false, key_lens: src_lens.clone() };
        for layer in &p.encoder {
            let h = g.layer_norm(x, layer.self_norm.gain, layer.self_norm.bias, eps())?;
            let a = attention_block(g, &layer.self_attn, h, h, enc_spec.clone())?;
            let a = maybe_dropout(g, a, rate, dropout.as_deref_mut())?;
            x = g.add(x, a)?;
            let h = g.layer_norm(x, layer.ffn_norm.gain, layer.ffn_norm.bias, eps())?;
            let f = ffn_block(g, &layer.ffn, h)?;
            let f = maybe_dropout(g, f, rate, dropout.as_deref_mut())?;
            x = g.add(x, f)?;
        }
        let memory = g.layer_norm(x, p.encoder_norm.gain, p.encoder_norm.bias, eps())?;

        let mut y = self.embed(g, p, batch.iter().map(|e| e.decoder_input.as_slice()), dec_len)?;
        let self_spec = AttentionSpec { batch: batch.len(), q_len: dec_len, k_len: dec_len, heads, causal: true, key_lens: dec_lens };
        let cross_spec = AttentionSpec { batch: batch.len(), q_len: dec_len, k_len: src_len, heads, causal: false, key_lens: src_lens };
        debug_assert_eq!(d % heads, 0);
        for layer in &p.decoder {
            let h = g.layer_norm(y, layer.self_norm.gain, layer.self_norm.bias, eps())?;
            let a = attention_block(g, &layer.self_attn, h, h, self_spec.clone())?;
            let a = maybe_dropout(g, a, rate, dropout.as_deref_mut())?;
            y = g.add(y, a)?;
            let h = g.layer_norm(y, layer.cross_norm.gain, layer.cross_norm.bias, eps())?;
            let c = attention_block(g, &layer.cross_attn, h, memory, cross_spec.clone())?;
            let c = maybe_dropout(g, c, rate, dropout.as_deref_mut())?;
            y = g.add(y, c)?;
            let h = g.layer_norm(y, layer.ffn_norm.gain, layer.ffn_norm.bias, eps())?;
            let f = ffn_block(g, &layer.ffn, h)?;
            let f = maybe_dropout(g, f, rate, dropout.as_deref_mut())?;
            y = g.add(y, f)?;
        }
        let out = g.layer_norm(y, p.decoder_norm.gain, p.decoder_norm.bias, eps())?;
        g.matmul_nt(out, p.embedding)
    }

    /// Mean label-smoothed cross-entropy of a batch.
    pub fn batch_loss(&self, g: &mut Graph<T>, p: &ModelParams<Var>, batch: &[&Example], label_smoothing: f64, dropout: Option<&mut SeededRng>) -> Result<Var> {
        let logits = self.batch_logits(g, p, batch, dropout)?;
        let dec_len = batch.iter().map(|e| e.decoder_input.len()).max().unwrap_or(0);
        let mut targets = Vec::with_capacity(batch.len() * dec_len);
        for e in batch {
            targets.extend_from_slice(&e.targets);
            targets.resize(targets.len() + dec_len - e.targets.len(), PAD);
        }
        g.cross_entropy(logits, &targets, label_smoothing, PAD)
    }

    /// Next-token logits `[len(decoder input) x vocab]` for every decoder
    /// position: decoder input is `[tgt_tag, bos] + tgt_prefix`.
    pub fn forward(&self, src_lang: &LangCode, src: &[usize], tgt_lang: &LangCode, tgt_prefix: &[usize]) -> Result<Tensor<T>> {
        let ex = self.example(src_lang, src, tgt_lang, tgt_prefix)?;
        let mut g = Graph::new();
        let p = self.params.try_map(&mut |t| g.constant(t.shape().to_vec(), t.data().to_vec()))?;
        let logits = self.batch_logits(&mut g, &p, &[&ex], None)?;
        Ok(g.tensor(logits))
    }

    fn embed<'a>(&self, g: &mut Graph<T>, p: &ModelParams<Var>, seqs: impl Iterator<Item = &'a [usize]>, len: usize) -> Result<Var> {
        let d = self.config.d_model;
        let pe = positional_encoding::<T>(len, d);
        let mut ids = Vec::new();
        let mut count = 0;
        for s in seqs {
            ids.extend_from_slice(s);
            ids.resize(ids.len() + len - s.len(), PAD);
            count += 1;
        }
        let e = g.embedding(p.embedding, &ids)?;
        let e = g.scale(e, T::of((d as f64).sqrt()))?;
        let mut pos = Vec::with_capacity(count * len * d);
        for _ in 0..count {
            pos.extend_from_slice(&pe);
        }
        let pos = g.constant(vec![count * len, d], pos)?;
        g.add(e, pos)
    }
}

fn expected_shape(name: &str, d: usize, f: usize, vocab: usize) -> Vec<usize> {
    let leaf = name.rsplit('.').next().unwrap_or(name);
    if name == "embedding" {
        return vec![vocab, d];
    }
    match leaf {
        "gain" | "bias" | "bq" | "bk" | "bv" | "bo" | "b2" => vec![d],
        "b1" => vec![f],
        "wq" | "wk" | "wv" | "wo" => vec![d, d],
        "w1" => vec![d, f],
        "w2" => vec![f, d],
        _ => vec![],
    }
}

fn eps<T: Scalar>() -> T {
    T::of(ModelConfig::LAYER_NORM_EPS)
}

fn maybe_dropout<T: Scalar>(g: &mut Graph<T>, x: Var, rate: f64, rng: Option<&mut SeededRng>) -> Result<Var> {
    match rng {
        Some(r) if rate > 0.0 => g.dropout(x, rate, r),
        _ => Ok(x),
    }
}

fn attention_block<T: Scalar>(g: &mut Graph<T>, a: &Attention<Var>, queries: Var, keys: Var, spec: AttentionSpec) -> Result<Var> {
    let q = g.linear(queries, a.wq, a.bq)?;
    let k = g.linear(keys, a.wk, a.bk)?;
    let v = g.linear(keys, a.wv, a.bv)?;
    let o = g.attention(q, k, v, spec)?;
    g.linear(o, a.wo, a.bo)
}

fn ffn_block<T: Scalar>(g: &mut Graph<T>, f: &FeedForward<Var>, x: Var) -> Result<Var> {
    let h = g.linear(x, f.w1, f.b1)?;
    let h = g.gelu(h)?;
    g.linear(h, f.w2, f.b2)
}
