use std::collections::BTreeMap;

use prunemt::model::checkpoint::{checkpoint_bytes, checkpoint_from_bytes, fingerprint};
use prunemt::model::vocab::{EOS, PAD};
use prunemt::model::{quantize_fp16, remove_layers, DecodeRequest, ModelConfig, Precision, SearchConfig, Side, TranslationModel, Vocab};
use prunemt::numerics::{Graph, SeededRng};
use prunemt::{Error, LangCode};

fn lang(s: &str) -> LangCode {
    s.parse().unwrap()
}

fn tiny_config(enc: usize, dec: usize) -> ModelConfig {
    ModelConfig { d_model: 8, n_heads: 2, ffn_dim: 12, n_encoder_layers: enc, n_decoder_layers: dec, max_positions: 24, ..Default::default() }
}

fn vocab() -> Vocab {
    Vocab::build(&[lang("eng_Latn"), lang("swh_Latn")], ["abcdefg "])
}

fn tiny<T: prunemt::numerics::Scalar>(enc: usize, dec: usize, seed: u64) -> TranslationModel<T> {
    TranslationModel::new(tiny_config(enc, dec), vocab(), &SeededRng::new(seed)).unwrap()
}

#[test]
fn incremental_decoder_matches_teacher_forced_graph() {
    let m = tiny::<f64>(2, 3, 1);
    let v = m.vocab().clone();
    let (src, tgt) = (v.tokenize("abc de"), v.tokenize("gfa"));
    let a = m.forward(&lang("eng_Latn"), &src, &lang("swh_Latn"), &tgt).unwrap();
    let b = m.forward_incremental(&lang("eng_Latn"), &src, &lang("swh_Latn"), &tgt).unwrap();
    assert_eq!(a.shape(), b.shape());
    assert_eq!(a.shape(), &[tgt.len() + 2, v.len()]);
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
}

#[test]
fn padding_does_not_change_a_rows_logits() {
    let m = tiny::<f64>(2, 2, 2);
    let v = m.vocab().clone();
    let (e, s) = (lang("eng_Latn"), lang("swh_Latn"));
    let short = m.example(&e, &v.tokenize("ab"), &s, &v.tokenize("c")).unwrap();
    let long = m.example(&e, &v.tokenize("abcdefg"), &s, &v.tokenize("cdefg")).unwrap();
    let alone = m.forward(&e, &v.tokenize("ab"), &s, &v.tokenize("c")).unwrap();
    let mut g = Graph::new();
    let p = m.bind(&mut g).unwrap();
    let logits = m.batch_logits(&mut g, &p, &[&short, &long], None).unwrap();
    let batched = g.value(logits);
    let n = alone.numel();
    for (x, y) in alone.data().iter().zip(&batched[..n]) {
        assert!((x - y).abs() < 1e-10);
    }
}

/// Central differences in f64 against the graph's analytic gradient for a
/// sample of coordinates of every tensor, with dropout and label smoothing.
#[test]
fn loss_gradient_matches_finite_differences() {
    let mut m = tiny::<f64>(1, 2, 3);
    let v = m.vocab().clone();
    let (e, s) = (lang("eng_Latn"), lang("swh_Latn"));
    let ex = [m.example(&e, &v.tokenize("abc"), &s, &v.tokenize("fed")).unwrap(), m.example(&s, &v.tokenize("g a"), &e, &v.tokenize("b")).unwrap()];
    let batch: Vec<_> = ex.iter().collect();
    let loss_of = |m: &TranslationModel<f64>| {
        let mut g = Graph::new();
        let p = m.bind(&mut g).unwrap();
        let l = m.batch_loss(&mut g, &p, &batch, 0.1, None).unwrap();
        g.value(l)[0]
    };
    let mut g = Graph::new();
    let p = m.bind(&mut g).unwrap();
    let l = m.batch_loss(&mut g, &p, &batch, 0.1, None).unwrap();
    let grads = g.backward(l).unwrap();
    m.accumulate_grads(&p, &grads).unwrap();

    let names: Vec<String> = m.tensors().into_iter().map(|(n, _)| n).collect();
    let mut rng = SeededRng::new(9);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (ti, name) in names.iter().enumerate() {
        let numel = m.tensors()[ti].1.numel();
        for _ in 0..3 {
            let i = rng.below(numel);
            let analytic = m.tensors()[ti].1.grad().unwrap()[i];
            let mut plus = m.clone();
            plus.tensors_mut()[ti].data_mut()[i] += h;
            let mut minus = m.clone();
            minus.tensors_mut()[ti].data_mut()[i] -= h;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let err = (analytic - numeric).abs() / (1e-6 + analytic.abs().max(numeric.abs()));
            assert!(err < 1e-4, "{name}[{i}]: analytic {analytic} numeric {numeric}");
            worst = worst.max(err);
        }
    }
    assert!(worst.is_finite());
}

#[test]
fn overlength_input_is_an_error() {
    let m = tiny::<f32>(1, 1, 4);
    let src = vec![m.vocab().char_id('a').unwrap(); 40];
    match m.encode(&lang("eng_Latn"), &src) {
        Err(Error::Overlength { len, max }) => assert_eq!((len, max), (42, 24)),
        other => panic!("expected overlength, got {other:?}"),
    }
}

#[test]
fn unknown_language_is_an_error() {
    let m = tiny::<f32>(1, 1, 4);
    assert!(matches!(m.encode(&lang("hau_Latn"), &[]), Err(Error::UnknownLanguage(_))));
}

#[test]
fn beam_one_equals_greedy_on_a_model() {
    let m = tiny::<f32>(2, 2, 5);
    let v = m.vocab().clone();
    let reqs: Vec<_> = ["abc", "g", "", "fed cba"].iter().map(|t| DecodeRequest { src_lang: lang("eng_Latn"), src: v.tokenize(t), tgt_lang: lang("swh_Latn") }).collect();
    let cfg = SearchConfig { beam_size: 1, max_len: 10, length_penalty: 1.0 };
    let beam = m.translate_batch(&reqs, &cfg).unwrap();
    let greedy = m.greedy_batch(&reqs, 10).unwrap();
    for (b, g) in beam.iter().zip(&greedy) {
        assert_eq!(b.tokens, g.tokens);
    }
}

#[test]
fn batched_beam_search_matches_one_at_a_time() {
    let m = tiny::<f32>(2, 2, 6);
    let v = m.vocab().clone();
    let reqs: Vec<_> = ["abc", "gg", "fed cba"].iter().map(|t| DecodeRequest { src_lang: lang("swh_Latn"), src: v.tokenize(t), tgt_lang: lang("eng_Latn") }).collect();
    let cfg = SearchConfig { beam_size: 3, max_len: 8, length_penalty: 1.0 };
    let batched = m.translate_batch(&reqs, &cfg).unwrap();
    for (r, b) in reqs.iter().zip(&batched) {
        let single = m.translate(r, &cfg).unwrap();
        assert_eq!(single.tokens, b.tokens);
        assert!((single.score - b.score).abs() < 1e-5);
    }
}

#[test]
fn generated_tokens_are_never_special_or_tags() {
    let m = tiny::<f32>(1, 1, 7);
    let v = m.vocab().clone();
    let req = DecodeRequest { src_lang: lang("eng_Latn"), src: v.tokenize("abc"), tgt_lang: lang("swh_Latn") };
    let h = m.translate(&req, &SearchConfig { beam_size: 4, max_len: 12, length_penalty: 1.0 }).unwrap();
    assert!(h.tokens.iter().all(|&t| v.is_generable(t) && t != EOS && t != PAD));
}

#[test]
fn forced_log_prob_sums_the_forward_pass() {
    let m = tiny::<f64>(1, 2, 8);
    let v = m.vocab().clone();
    let (e, s) = (lang("eng_Latn"), lang("swh_Latn"));
    let (src, tgt) = (v.tokenize("abc"), v.tokenize("de"));
    let (lp, n) = m.forced_log_prob(&e, &src, &s, &tgt).unwrap();
    assert_eq!(n, 3);
    let logits = m.forward(&e, &src, &s, &tgt).unwrap();
    let vs = v.len();
    let mut expect = 0.0;
    for (pos, &tok) in tgt.iter().chain([EOS].iter()).enumerate() {
        let row = &logits.data()[(pos + 1) * vs..][..vs];
        let allowed: Vec<f64> = (0..vs).filter(|&i| v.is_generable(i)).map(|i| row[i]).collect();
        let lse = allowed.iter().map(|x| x.exp()).sum::<f64>().ln();
        expect += row[tok] - lse;
    }
    assert!((lp - expect).abs() < 1e-9);
}

#[test]
fn removing_layers_keeps_survivors_and_origins() {
    let m = tiny::<f32>(4, 4, 9);
    let pruned = remove_layers(&m, Side::Decoder, &[1, 2]).unwrap();
    assert_eq!(pruned.layer_count(Side::Decoder), 2);
    assert_eq!(pruned.config().n_decoder_layers, 2);
    assert_eq!(pruned.layer_origins(Side::Decoder), vec![0, 3]);
    assert_eq!(pruned.params().decoder[1], m.params().decoder[3]);
    assert_eq!(pruned.params().encoder, m.params().encoder);
    let again = remove_layers(&pruned, Side::Decoder, &[0]).unwrap();
    assert_eq!(again.layer_origins(Side::Decoder), vec![3]);
    assert!(remove_layers(&m, Side::Encoder, &[0, 1, 2, 3]).is_err());
    assert!(remove_layers(&m, Side::Encoder, &[4]).is_err());
    assert!(remove_layers(&m, Side::Encoder, &[1, 1]).is_err());
}

#[test]
fn removing_an_identity_layer_preserves_outputs() {
    let mut m = tiny::<f64>(3, 3, 10);
    // zero every residual branch output of decoder layer 1 and encoder layer 2
    {
        let p = m.params_mut();
        let l = &mut p.decoder[1];
        for t in [&mut l.self_attn.wo, &mut l.self_attn.bo, &mut l.cross_attn.wo, &mut l.cross_attn.bo, &mut l.ffn.w2, &mut l.ffn.b2] {
            t.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        let l = &mut p.encoder[2];
        for t in [&mut l.self_attn.wo, &mut l.self_attn.bo, &mut l.ffn.w2, &mut l.ffn.b2] {
            t.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
    }
    let pruned = remove_layers(&remove_layers(&m, Side::Decoder, &[1]).unwrap(), Side::Encoder, &[2]).unwrap();
    let v = m.vocab().clone();
    let (e, s) = (lang("eng_Latn"), lang("swh_Latn"));
    let a = m.forward(&e, &v.tokenize("bad cafe"), &s, &v.tokenize("fa")).unwrap();
    let b = pruned.forward(&e, &v.tokenize("bad cafe"), &s, &v.tokenize("fa")).unwrap();
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() < 1e-12);
    }
}

/// Independent binary16 rounding: round-to-nearest-even on the f32 bits.
fn f16_round_oracle(x: f32) -> f32 {
    let bits = x.to_bits();
    let sign = if bits >> 31 == 1 { -1.0f64 } else { 1.0 };
    let a = (x as f64).abs();
    if a == 0.0 {
        return x;
    }
    // quantum of the binary16 grid at this magnitude
    let exp = a.log2().floor().max(-14.0);
    let quantum = 2f64.powf(exp - 10.0);
    let q = a / quantum;
    let fl = q.floor();
    let r = if q - fl > 0.5 || (q - fl == 0.5 && fl % 2.0 == 1.0) { fl + 1.0 } else { fl };
    let out = r * quantum;
    if out > 65504.0 {
        return sign as f32 * f32::INFINITY;
    }
    (sign * out) as f32
}

#[test]
fn fp16_rounding_matches_bitwise_oracle() {
    let mut m = tiny::<f32>(1, 1, 11);
    let specials = [1.0f32 + 2f32.powi(-11), 1.0 + 3.0 * 2f32.powi(-11), 65504.0, -2f32.powi(-24), 2f32.powi(-25) * 1.5, 3.0e-8, 0.1, -0.0];
    m.params_mut().embedding.data_mut()[..specials.len()].copy_from_slice(&specials);
    let q = quantize_fp16(&m).unwrap();
    assert_eq!(q.precision(), Precision::F16);
    for ((_, a), (_, b)) in m.tensors().iter().zip(q.tensors()) {
        for (&x, &y) in a.data().iter().zip(b.data()) {
            assert_eq!(f16_round_oracle(x).to_bits(), y.to_bits(), "{x}");
        }
    }
    // ties go to even
    assert_eq!(q.params().embedding.data()[0], 1.0);
    assert_eq!(q.params().embedding.data()[1], 1.0 + 2.0 * 2f32.powi(-10));
}

#[test]
fn fp16_overflow_names_the_tensor() {
    let mut m = tiny::<f32>(1, 1, 12);
    m.params_mut().decoder[0].ffn.w1.data_mut()[3] = 70000.0;
    match quantize_fp16(&m) {
        Err(Error::Fp16Overflow(names)) => assert_eq!(names, vec!["decoder.0.ffn.w1".to_string()]),
        other => panic!("expected overflow, got {other:?}"),
    }
}

#[test]
fn checkpoint_round_trips_exactly() {
    let m = remove_layers(&tiny::<f32>(3, 3, 13), Side::Encoder, &[1]).unwrap();
    let mut meta = BTreeMap::new();
    meta.insert("stage".to_string(), serde_json::json!("pruned"));
    let bytes = checkpoint_bytes(&m, &meta).unwrap();
    let back = checkpoint_from_bytes::<f32>(&bytes).unwrap();
    assert_eq!(back.model, m);
    assert_eq!(back.metadata, meta);
    assert_eq!(fingerprint(&bytes), fingerprint(&checkpoint_bytes(&back.model, &meta).unwrap()));

    let q = quantize_fp16(&m).unwrap();
    let qbytes = checkpoint_bytes(&q, &meta).unwrap();
    let qback = checkpoint_from_bytes::<f32>(&qbytes).unwrap();
    assert_eq!(qback.model, q);
    let n = m.parameter_count();
    assert!(bytes.len() - qbytes.len() >= n * 2 - 64);
}

#[test]
fn corrupt_checkpoints_report_offsets() {
    let m = tiny::<f32>(1, 1, 14);
    let bytes = checkpoint_bytes(&m, &BTreeMap::new()).unwrap();
    let truncated = &bytes[..bytes.len() - 10];
    match checkpoint_from_bytes::<f32>(truncated) {
        Err(Error::Checkpoint { offset, .. }) => assert_eq!(offset as usize, truncated.len()),
        other => panic!("expected checkpoint error, got {other:?}"),
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(checkpoint_from_bytes::<f32>(&bad), Err(Error::Checkpoint { offset: 0, .. })));
    assert!(matches!(checkpoint_from_bytes::<f32>(&bytes[..5]), Err(Error::Checkpoint { .. })));
}

#[test]
fn one_at_a_time_removal_equals_batched_removal() {
    let m = tiny::<f32>(2, 5, 15);
    let batched = remove_layers(&m, Side::Decoder, &[1, 3]).unwrap();
    let first = remove_layers(&m, Side::Decoder, &[3]).unwrap();
    let sequential = remove_layers(&first, Side::Decoder, &[1]).unwrap();
    assert_eq!(batched, sequential);
    assert_eq!(remove_layers(&m, Side::Decoder, &[]).unwrap(), m);
}

#[test]
fn saved_files_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny::<f32>(2, 2, 16);
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    let fa = prunemt::model::checkpoint::save_checkpoint(&m, &BTreeMap::new(), &a).unwrap();
    let loaded = prunemt::model::checkpoint::load_checkpoint::<f32>(&a).unwrap();
    let fb = prunemt::model::checkpoint::save_checkpoint(&loaded.model, &loaded.metadata, &b).unwrap();
    assert_eq!(fa, fb);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn target_language_tag_conditions_the_decoder() {
    let m = tiny::<f64>(1, 2, 17);
    let v = m.vocab().clone();
    let src = v.tokenize("abc");
    let to_swh = m.forward(&lang("eng_Latn"), &src, &lang("swh_Latn"), &[]).unwrap();
    let to_eng = m.forward(&lang("eng_Latn"), &src, &lang("eng_Latn"), &[]).unwrap();
    assert_ne!(to_swh.data(), to_eng.data());
    let again = m.forward(&lang("eng_Latn"), &src, &lang("swh_Latn"), &[]).unwrap();
    assert_eq!(to_swh.data(), again.data());
}

#[test]
fn fp16_halves_parameter_storage() {
    let m = tiny::<f32>(2, 2, 18);
    let q = quantize_fp16(&m).unwrap();
    assert_eq!(q.precision(), Precision::F16);
    let storage = prunemt::model::checkpoint::storage_bytes;
    assert_eq!(storage(&m), 4 * m.parameter_count());
    assert_eq!(storage(&q), 2 * m.parameter_count());
    assert_eq!(quantize_fp16(&q).unwrap(), q);
}

#[test]
fn output_length_is_capped_by_position_capacity() {
    // eos logit pinned far below everything else, so decoding never stops on its own
    let vocab = Vocab::build(&[lang("eng_Latn"), lang("swh_Latn")], ["abc "]);
    let cfg = ModelConfig { d_model: 8, n_heads: 2, ffn_dim: 12, n_encoder_layers: 1, n_decoder_layers: 1, max_positions: 48, ..ModelConfig::default() };
    let mut m = TranslationModel::<f32>::new(cfg, vocab, &SeededRng::new(5)).unwrap();
    let p = m.params_mut();
    p.decoder_norm.gain.data_mut().iter_mut().for_each(|x| *x = 0.0);
    p.decoder_norm.bias.data_mut().iter_mut().for_each(|x| *x = 1.0);
    p.embedding.data_mut()[EOS * 8..(EOS + 1) * 8].iter_mut().for_each(|x| *x = -100.0);
    assert_eq!(m.max_output_len(), 47);
    let req = DecodeRequest { src_lang: lang("eng_Latn"), src: m.vocab().tokenize("abc"), tgt_lang: lang("swh_Latn") };
    for beam_size in [1, 3] {
        let h = m.translate(&req, &SearchConfig { beam_size, max_len: 500, length_penalty: 1.0 }).unwrap();
        assert_eq!(h.tokens.len(), 47);
    }
    assert_eq!(m.greedy_batch(std::slice::from_ref(&req), 500).unwrap()[0].tokens.len(), 47);
    let short = m.translate(&req, &SearchConfig { beam_size: 2, max_len: 5, length_penalty: 1.0 }).unwrap();
    assert_eq!(short.tokens.len(), 5);
}
