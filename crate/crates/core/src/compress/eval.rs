use std::collections::BTreeMap;

use crate::corpus::ParallelRecord;
use crate::error::{Error, Result};
use crate::lang::Direction;
use crate::metrics::{chrf_pp, ChrfConfig};
use crate::model::{DecodeRequest, SearchConfig, TranslationModel};
use crate::numerics::Scalar;

/// Requests decoded together by the dev-set helpers.
pub const DEV_BATCH: usize = 32;

/// Translates every record's source into its target language, in order.
pub fn translate_records<T: Scalar>(model: &TranslationModel<T>, records: &[ParallelRecord], search: &SearchConfig) -> Result<Vec<String>> {
    let v = model.vocab();
    let mut out = Vec::with_capacity(records.len());
    for chunk in records.chunks(DEV_BATCH) {
        let reqs: Vec<DecodeRequest> = chunk.iter().map(|r| DecodeRequest { src_lang: r.src_lang.clone(), src: v.tokenize(&r.src), tgt_lang: r.tgt_lang.clone() }).collect();
        let hyps = if search.beam_size == 1 { model.greedy_batch(&reqs, search.max_len)? } else { model.translate_batch(&reqs, search)? };
        out.extend(hyps.iter().map(|h| v.detokenize(&h.tokens)));
    }
    Ok(out)
}

/// Corpus chrF++ per direction.
pub fn chrf_by_direction<T: Scalar>(model: &TranslationModel<T>, dev: &[ParallelRecord], search: &SearchConfig) -> Result<BTreeMap<Direction, f64>> {
    let mut groups: BTreeMap<Direction, Vec<ParallelRecord>> = BTreeMap::new();
    for r in dev {
        groups.entry(r.direction()).or_default().push(r.clone());
    }
    let cfg = ChrfConfig::default();
    groups
        .into_iter()
        .map(|(d, recs)| {
            let hyps = translate_records(model, &recs, search)?;
            let refs: Vec<&str> = recs.iter().map(|r| r.tgt.as_str()).collect();
            let hyps: Vec<&str> = hyps.iter().map(String::as_str).collect();
            Ok((d, chrf_pp(&hyps, &refs, &cfg)?.value))
        })
        .collect()
}

/// Unweighted mean of per-direction chrF++.
pub fn mean_chrf<T: Scalar>(model: &TranslationModel<T>, dev: &[ParallelRecord], search: &SearchConfig) -> Result<f64> {
    let by = chrf_by_direction(model, dev, search)?;
    if by.is_empty() {
        return Err(Error::invalid("no dev records to score"));
    }
    Ok(by.values().sum::<f64>() / by.len() as f64)
}
