use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::batching::batch_records;
use super::report::EvalRow;
use crate::corpus::ParallelRecord;
use crate::error::{Error, Result};
use crate::metrics::{bleu, chrf_pp, BleuConfig, ChrfConfig};
use crate::model::{DecodeRequest, Hypothesis, SearchConfig, TranslationModel};
use crate::numerics::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub beam_size: usize,
    /// Maximum summed source tokens per batch.
    pub batch_token_budget: usize,
    pub max_output_length: usize,
    pub length_penalty: f64,
    /// Worker threads for decoding; batches are decoded in parallel and
    /// reassembled in input order.
    pub threads: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { beam_size: 3, batch_token_budget: 1024, max_output_length: 200, length_penalty: 1.0, threads: 1 }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beam_size", self.beam_size), ("batch_token_budget", self.batch_token_budget), ("max_output_length", self.max_output_length), ("threads", self.threads)]
        {
            if v == 0 {
                return Err(Error::config(format!("decode.{name} must be positive")));
            }
        }
        if !(self.length_penalty.is_finite() && self.length_penalty >= 0.0) {
            return Err(Error::config("decode.length_penalty must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig { beam_size: self.beam_size, max_len: self.max_output_length, length_penalty: self.length_penalty }
    }
}

/// Output tokens per second over the timed pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub tokens_per_second: f64,
    /// Wall time of the timed pass over all batches.
    pub timed_seconds: f64,
    /// Warmup plus timed pass.
    pub total_seconds: f64,
    /// Generated target tokens, language tag and eos excluded.
    pub output_tokens: usize,
    pub batches: usize,
    pub warmup_batches: usize,
}

struct Timed {
    hyps: Vec<Hypothesis>,
    throughput: Throughput,
}

fn decode_timed<T: Scalar>(model: &TranslationModel<T>, testset: &[ParallelRecord], cfg: &DecodeConfig, warmup_batches: usize) -> Result<Timed> {
    cfg.validate()?;
    if testset.is_empty() {
        return Err(Error::invalid("benchmark test set is empty"));
    }
    let v = model.vocab();
    let reqs: Vec<DecodeRequest> = testset.iter().map(|r| DecodeRequest { src_lang: r.src_lang.clone(), src: v.tokenize(&r.src), tgt_lang: r.tgt_lang.clone() }).collect();
    let batches = batch_records(testset, v, cfg.batch_token_budget)?;
    let search = cfg.search();
    let decode = |range: &std::ops::Range<usize>| -> Result<Vec<Hypothesis>> {
        let chunk = &reqs[range.clone()];
        if search.beam_size == 1 {
            model.greedy_batch(chunk, search.max_len)
        } else {
            model.translate_batch(chunk, &search)
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().map_err(|e| Error::config(format!("cannot build a {}-thread pool: {e}", cfg.threads)))?;
    let run_all = |ranges: &[std::ops::Range<usize>]| -> Result<Vec<Hypothesis>> {
        use rayon::prelude::*;
        let parts: Vec<Vec<Hypothesis>> = pool.install(|| ranges.par_iter().map(decode).collect::<Result<_>>())?;
        Ok(parts.into_iter().flatten().collect())
    };

    let warm = warmup_batches.min(batches.len());
    let t0 = Instant::now();
    run_all(&batches[..warm])?;
    let t1 = Instant::now();
    let hyps = run_all(&batches)?;
    let t2 = Instant::now();

    let timed_seconds = (t2 - t1).as_secs_f64();
    let output_tokens: usize = hyps.iter().map(|h| h.tokens.len()).sum();
    let tokens_per_second = if output_tokens == 0 || timed_seconds <= 0.0 { 0.0 } else { output_tokens as f64 / timed_seconds };
    Ok(Timed {
        hyps,
        throughput: Throughput { tokens_per_second, timed_seconds, total_seconds: (t2 - t0).as_secs_f64(), output_tokens, batches: batches.len(), warmup_batches: warm },
    })
}

/// Decodes `testset` once as warmup for `warmup_batches` batches, then times
/// a full pass.
pub fn bench_throughput<T: Scalar>(model: &TranslationModel<T>, testset: &[ParallelRecord], cfg: &DecodeConfig, warmup_batches: usize) -> Result<Throughput> {
    Ok(decode_timed(model, testset, cfg, warmup_batches)?.throughput)
}

/// Scores one direction: BLEU and chrF++ of the timed pass's output plus its
/// throughput.
pub fn evaluate_direction<T: Scalar>(model: &TranslationModel<T>, model_id: &str, testset: &[ParallelRecord], cfg: &DecodeConfig, warmup_batches: usize) -> Result<EvalRow> {
    let directions: BTreeSet<_> = testset.iter().map(|r| r.direction()).collect();
    let direction = match directions.len() {
        0 => return Err(Error::invalid("evaluation test set is empty")),
        1 => directions.into_iter().next().unwrap(),
        n => return Err(Error::invalid(format!("evaluation test set mixes {n} directions"))),
    };
    let timed = decode_timed(model, testset, cfg, warmup_batches)?;
    let v = model.vocab();
    let hyps: Vec<String> = timed.hyps.iter().map(|h| v.detokenize(&h.tokens)).collect();
    let refs: Vec<&str> = testset.iter().map(|r| r.tgt.as_str()).collect();
    let hyps: Vec<&str> = hyps.iter().map(String::as_str).collect();
    let b = bleu(&hyps, &refs, &BleuConfig::default())?;
    let c = chrf_pp(&hyps, &refs, &ChrfConfig::default())?;
    let mut warnings = b.warnings;
    warnings.extend(c.warnings);
    Ok(EvalRow {
        model: model_id.to_string(),
        direction,
        segments: testset.len(),
        bleu: b.value,
        chrf_pp: c.value,
        comet: None,
        tokens_per_second: timed.throughput.tokens_per_second,
        total_seconds: timed.throughput.total_seconds,
        output_tokens: timed.throughput.output_tokens,
        decode: cfg.clone(),
        warnings,
    })
}
