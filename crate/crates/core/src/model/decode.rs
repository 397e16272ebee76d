//! Gradient-free inference: source encoding and a batched incremental decoder
//! with per-row self-attention caches.

use crate::error::{Error, Result};
use crate::lang::LangCode;
use crate::model::config::ModelConfig;
use crate::model::params::Attention;
use crate::model::search::{self, Hypothesis, IncrementalScorer, SearchConfig};
use crate::model::transformer::{positional_encoding, TranslationModel};
use crate::model::vocab::{BOS, EOS};
use crate::numerics::kernels::{axpy, dot, gelu, gemm, layer_norm_row_into, log_softmax_row, softmax_row};
use crate::numerics::{Scalar, Tensor};

/// One sentence to translate, already tokenized (no tags or eos).
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeRequest {
    pub src_lang: LangCode,
    pub src: Vec<usize>,
    pub tgt_lang: LangCode,
}

/// Encoder output projected into every decoder layer's cross-attention keys
/// and values, each `[src_len x d]`.
#[derive(Clone, Debug)]
pub struct EncodedSource<T> {
    pub len: usize,
    cross_k: Vec<Vec<T>>,
    cross_v: Vec<Vec<T>>,
}

#[derive(Clone, Debug, Default)]
struct RowCache<T> {
    source: usize,
    self_k: Vec<Vec<T>>,
    self_v: Vec<Vec<T>>,
}

fn eps<T: Scalar>() -> T {
    T::of(ModelConfig::LAYER_NORM_EPS)
}

/// `x [rows x din] * w [din x dout] + b`.
fn affine<T: Scalar>(x: &[T], rows: usize, w: &Tensor<T>, b: &Tensor<T>) -> Vec<T> {
    let (din, dout) = w.rows_cols();
    let mut out = Vec::with_capacity(rows * dout);
    for _ in 0..rows {
        out.extend_from_slice(b.data());
    }
    gemm(false, false, rows, din, dout, x, w.data(), &mut out, true);
    out
}

fn norm_rows<T: Scalar>(x: &[T], d: usize, gain: &Tensor<T>, bias: &Tensor<T>) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for (xr, or) in x.chunks(d).zip(out.chunks_mut(d)) {
        layer_norm_row_into(xr, gain.data(), bias.data(), eps(), or);
    }
    out
}

/// Multi-head attention of one query row over `n` cached key/value rows.
fn attend_row<T: Scalar>(q: &[T], keys: &[T], values: &[T], heads: usize, out: &mut [T], scratch: &mut Vec<T>) {
    let d = q.len();
    let dh = d / heads;
    let n = keys.len() / d;
    let scale = T::one() / T::of(dh as f64).sqrt();
    out.iter_mut().for_each(|o| *o = T::zero());
    scratch.clear();
    scratch.resize(n, T::zero());
    for h in 0..heads {
        let qh = &q[h * dh..][..dh];
        for j in 0..n {
            scratch[j] = dot(qh, &keys[j * d + h * dh..][..dh]) * scale;
        }
        softmax_row(&mut scratch[..n]);
        let oh = &mut out[h * dh..][..dh];
        for j in 0..n {
            axpy(scratch[j], &values[j * d + h * dh..][..dh], oh);
        }
    }
}

fn ffn_rows<T: Scalar>(h: &[T], rows: usize, f: &crate::model::params::FeedForward<Tensor<T>>) -> Vec<T> {
    let mut mid = affine(h, rows, &f.w1, &f.b1);
    mid.iter_mut().for_each(|v| *v = gelu(*v));
    affine(&mid, rows, &f.w2, &f.b2)
}

impl<T: Scalar> TranslationModel<T> {
    /// Embedded, scaled and position-encoded rows; `positions[i]` is the
    /// position of `ids[i]`.
    fn embed_rows(&self, ids: &[usize], positions: impl Fn(usize) -> usize) -> Vec<T> {
        let d = self.config().d_model;
        let scale = T::of((d as f64).sqrt());
        let max_pos = (0..ids.len()).map(&positions).max().unwrap_or(0);
        let pe = positional_encoding::<T>(max_pos + 1, d);
        let table = self.params().embedding.data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for (i, &id) in ids.iter().enumerate() {
            let pos = &pe[positions(i) * d..][..d];
            out.extend(table[id * d..][..d].iter().zip(pos).map(|(&e, &p)| e * scale + p));
        }
        out
    }

    /// Runs the encoder over `[src_tag] + src + [eos]` and precomputes the
    /// cross-attention projections.
    pub fn encode(&self, src_lang: &LangCode, src: &[usize]) -> Result<EncodedSource<T>> {
        let cfg = self.config();
        let d = cfg.d_model;
        let mut ids = Vec::with_capacity(src.len() + 2);
        ids.push(self.vocab().lang_tag(src_lang)?);
        ids.extend_from_slice(src);
        ids.push(EOS);
        self.check_length(ids.len())?;
        if let Some(&bad) = src.iter().find(|&&t| t >= self.vocab().len()) {
            return Err(Error::invalid(format!("token id {bad} outside vocabulary")));
        }
        let n = ids.len();
        let mut x = self.embed_rows(&ids, |i| i);
        let mut scratch = Vec::new();
        let p = self.params();
        for layer in &p.encoder {
            let h = norm_rows(&x, d, &layer.self_norm.gain, &layer.self_norm.bias);
            let a = self_attention_full(&h, n, d, cfg.n_heads, &layer.self_attn, &mut scratch);
            x.iter_mut().zip(&a).for_each(|(x, a)| *x += *a);
            let h = norm_rows(&x, d, &layer.ffn_norm.gain, &layer.ffn_norm.bias);
            let f = ffn_rows(&h, n, &layer.ffn);
            x.iter_mut().zip(&f).for_each(|(x, f)| *x += *f);
        }
        let memory = norm_rows(&x, d, &p.encoder_norm.gain, &p.encoder_norm.bias);
        let mut cross_k = Vec::with_capacity(p.decoder.len());
        let mut cross_v = Vec::with_capacity(p.decoder.len());
        for layer in &p.decoder {
            cross_k.push(affine(&memory, n, &layer.cross_attn.wk, &layer.cross_attn.bk));
            cross_v.push(affine(&memory, n, &layer.cross_attn.wv, &layer.cross_attn.bv));
        }
        let out = EncodedSource { len: n, cross_k, cross_v };
        if out.cross_k.iter().chain(&out.cross_v).flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder output".into()));
        }
        Ok(out)
    }

    /// One decoder step for every row: appends `tokens[r]` at position `pos`
    /// and returns next-token logits `[rows x vocab]`.
    fn decode_step(&self, sources: &[EncodedSource<T>], rows: &mut [RowCache<T>], tokens: &[usize], pos: usize) -> Result<Vec<T>> {
        let cfg = self.config();
        let d = cfg.d_model;
        let r = rows.len();
        self.check_length(pos + 1)?;
        let mut x = self.embed_rows(tokens, |_| pos);
        let p = self.params();
        let mut scratch = Vec::new();
        let mut att = vec![T::zero(); r * d];
        for (l, layer) in p.decoder.iter().enumerate() {
            let h = norm_rows(&x, d, &layer.self_norm.gain, &layer.self_norm.bias);
            let q = affine(&h, r, &layer.self_attn.wq, &layer.self_attn.bq);
            let k = affine(&h, r, &layer.self_attn.wk, &layer.self_attn.bk);
            let v = affine(&h, r, &layer.self_attn.wv, &layer.self_attn.bv);
            for (i, row) in rows.iter_mut().enumerate() {
                row.self_k[l].extend_from_slice(&k[i * d..][..d]);
                row.self_v[l].extend_from_slice(&v[i * d..][..d]);
                attend_row(&q[i * d..][..d], &row.self_k[l], &row.self_v[l], cfg.n_heads, &mut att[i * d..][..d], &mut scratch);
            }
            let o = affine(&att, r, &layer.self_attn.wo, &layer.self_attn.bo);
            x.iter_mut().zip(&o).for_each(|(x, o)| *x += *o);

            let h = norm_rows(&x, d, &layer.cross_norm.gain, &layer.cross_norm.bias);
            let q = affine(&h, r, &layer.cross_attn.wq, &layer.cross_attn.bq);
            for (i, row) in rows.iter().enumerate() {
                let src = &sources[row.source];
                attend_row(&q[i * d..][..d], &src.cross_k[l], &src.cross_v[l], cfg.n_heads, &mut att[i * d..][..d], &mut scratch);
            }
            let o = affine(&att, r, &layer.cross_attn.wo, &layer.cross_attn.bo);
            x.iter_mut().zip(&o).for_each(|(x, o)| *x += *o);

            let h = norm_rows(&x, d, &layer.ffn_norm.gain, &layer.ffn_norm.bias);
            let f = ffn_rows(&h, r, &layer.ffn);
            x.iter_mut().zip(&f).for_each(|(x, f)| *x += *f);
        }
        let out = norm_rows(&x, d, &p.decoder_norm.gain, &p.decoder_norm.bias);
        let v = self.vocab().len();
        let mut logits = vec![T::zero(); r * v];
        gemm(false, true, r, d, v, &out, p.embedding.data(), &mut logits, false);
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("decoder logits".into()));
        }
        Ok(logits)
    }

    /// Next-token logits for every decoder position, computed incrementally.
    /// Matches [`TranslationModel::forward`] up to rounding.
    pub fn forward_incremental(&self, src_lang: &LangCode, src: &[usize], tgt_lang: &LangCode, tgt_prefix: &[usize]) -> Result<Tensor<T>> {
        let enc = self.encode(src_lang, src)?;
        let mut inputs = vec![self.vocab().lang_tag(tgt_lang)?, BOS];
        inputs.extend_from_slice(tgt_prefix);
        let mut rows = vec![self.new_row(0)];
        let v = self.vocab().len();
        let mut all = Vec::with_capacity(inputs.len() * v);
        for (pos, &tok) in inputs.iter().enumerate() {
            all.extend(self.decode_step(std::slice::from_ref(&enc), &mut rows, &[tok], pos)?);
        }
        Tensor::new(vec![inputs.len(), v], all)
    }

    fn new_row(&self, source: usize) -> RowCache<T> {
        let l = self.params().decoder.len();
        RowCache { source, self_k: vec![Vec::new(); l], self_v: vec![Vec::new(); l] }
    }

    /// Longest output the decoder can produce: the target tag occupies one
    /// position and each generated token after the first needs another.
    pub fn max_output_len(&self) -> usize {
        self.config().max_positions.saturating_sub(1)
    }

    /// Beam search over a batch. Returned tokens exclude eos. Output length is
    /// capped at `min(cfg.max_len, max_output_len())`.
    pub fn translate_batch(&self, requests: &[DecodeRequest], cfg: &SearchConfig) -> Result<Vec<Hypothesis>> {
        let mut scorer = ModelScorer::new(self, requests)?;
        let cfg = SearchConfig { max_len: cfg.max_len.min(self.max_output_len()), ..cfg.clone() };
        search::beam_search(&mut scorer, requests.len(), &cfg)
    }

    pub fn greedy_batch(&self, requests: &[DecodeRequest], max_len: usize) -> Result<Vec<Hypothesis>> {
        let mut scorer = ModelScorer::new(self, requests)?;
        search::greedy_search(&mut scorer, requests.len(), max_len.min(self.max_output_len()))
    }

    pub fn translate(&self, req: &DecodeRequest, cfg: &SearchConfig) -> Result<Hypothesis> {
        Ok(self.translate_batch(std::slice::from_ref(req), cfg)?.remove(0))
    }

    /// Text-in, text-out convenience wrapper.
    pub fn translate_text(&self, src_lang: &LangCode, text: &str, tgt_lang: &LangCode, cfg: &SearchConfig) -> Result<String> {
        let req = DecodeRequest { src_lang: src_lang.clone(), src: self.vocab().tokenize(text), tgt_lang: tgt_lang.clone() };
        Ok(self.vocab().detokenize(&self.translate(&req, cfg)?.tokens))
    }

    /// Sum of generation log-probabilities of `tgt + [eos]` under teacher
    /// forcing, with the same output mask decoding uses. Returns the sum and
    /// the number of scored tokens.
    pub fn forced_log_prob(&self, src_lang: &LangCode, src: &[usize], tgt_lang: &LangCode, tgt: &[usize]) -> Result<(f64, usize)> {
        self.check_length(tgt.len() + 2)?;
        let req = DecodeRequest { src_lang: src_lang.clone(), src: src.to_vec(), tgt_lang: tgt_lang.clone() };
        let mut scorer = ModelScorer::new(self, std::slice::from_ref(&req))?;
        let mut lp = scorer.start()?;
        let mut total = 0.0;
        for (i, &tok) in tgt.iter().chain(std::iter::once(&EOS)).enumerate() {
            total += lp[tok];
            if i < tgt.len() {
                lp = scorer.advance(&[0], &[tok])?;
            }
        }
        Ok((total, tgt.len() + 1))
    }
}

fn self_attention_full<T: Scalar>(h: &[T], n: usize, d: usize, heads: usize, a: &Attention<Tensor<T>>, scratch: &mut Vec<T>) -> Vec<T> {
    let q = affine(h, n, &a.wq, &a.bq);
    let k = affine(h, n, &a.wk, &a.bk);
    let v = affine(h, n, &a.wv, &a.bv);
    let mut att = vec![T::zero(); n * d];
    for i in 0..n {
        attend_row(&q[i * d..][..d], &k, &v, heads, &mut att[i * d..][..d], scratch);
    }
    affine(&att, n, &a.wo, &a.bo)
}

/// Adapts a model to the search routines.
pub struct ModelScorer<'m, T> {
    model: &'m TranslationModel<T>,
    sources: Vec<EncodedSource<T>>,
    rows: Vec<RowCache<T>>,
    start_tokens: Vec<usize>,
    pos: usize,
    mask: Vec<bool>,
}

impl<'m, T: Scalar> ModelScorer<'m, T> {
    pub fn new(model: &'m TranslationModel<T>, requests: &[DecodeRequest]) -> Result<Self> {
        let sources = requests.iter().map(|r| model.encode(&r.src_lang, &r.src)).collect::<Result<Vec<_>>>()?;
        let start_tokens = requests.iter().map(|r| model.vocab().lang_tag(&r.tgt_lang)).collect::<Result<Vec<_>>>()?;
        let mask = (0..model.vocab().len()).map(|i| model.vocab().is_generable(i)).collect();
        Ok(ModelScorer { model, sources, rows: Vec::new(), start_tokens, pos: 0, mask })
    }

    fn log_probs(&self, logits: Vec<T>) -> Vec<f64> {
        let v = self.mask.len();
        let mut out = Vec::with_capacity(logits.len());
        let mut row = vec![T::zero(); v];
        for chunk in logits.chunks(v) {
            for (i, (&x, &ok)) in chunk.iter().zip(&self.mask).enumerate() {
                row[i] = if ok { x } else { T::neg_infinity() };
            }
            log_softmax_row(&mut row);
            out.extend(row.iter().map(|x| x.f64()));
        }
        out
    }
}

impl<T: Scalar> IncrementalScorer for ModelScorer<'_, T> {
    fn vocab_size(&self) -> usize {
        self.mask.len()
    }

    fn eos(&self) -> usize {
        EOS
    }

    fn start(&mut self) -> Result<Vec<f64>> {
        self.rows = (0..self.sources.len()).map(|s| self.model.new_row(s)).collect();
        let tags = self.start_tokens.clone();
        self.model.decode_step(&self.sources, &mut self.rows, &tags, 0)?;
        let logits = self.model.decode_step(&self.sources, &mut self.rows, &vec![BOS; tags.len()], 1)?;
        self.pos = 2;
        Ok(self.log_probs(logits))
    }

    fn advance(&mut self, parents: &[usize], tokens: &[usize]) -> Result<Vec<f64>> {
        let mut uses = vec![0usize; self.rows.len()];
        for &p in parents {
            uses[p] += 1;
        }
        let mut old: Vec<Option<RowCache<T>>> = std::mem::take(&mut self.rows).into_iter().map(Some).collect();
        let mut rows = Vec::with_capacity(parents.len());
        for &p in parents {
            uses[p] -= 1;
            rows.push(if uses[p] == 0 { old[p].take().expect("parent row used after its last reference") } else { old[p].clone().expect("parent row present") });
        }
        self.rows = rows;
        let logits = self.model.decode_step(&self.sources, &mut self.rows, tokens, self.pos)?;
        self.pos += 1;
        Ok(self.log_probs(logits))
    }
}
