use std::ops::Range;

use crate::corpus::ParallelRecord;
use crate::error::{Error, Result};
use crate::model::Vocab;

/// Greedy packing of consecutive items into batches whose summed length
/// stays within `budget`. Returns index ranges covering `lengths` in order.
pub fn batch_by_tokens(lengths: &[usize], budget: usize) -> Result<Vec<Range<usize>>> {
    if budget == 0 {
        return Err(Error::invalid("token budget must be positive"));
    }
    let mut out = Vec::new();
    let (mut start, mut used) = (0, 0);
    for (i, &len) in lengths.iter().enumerate() {
        if len > budget {
            return Err(Error::invalid(format!("record {i} has {len} source tokens, over the batch budget of {budget}")));
        }
        if used + len > budget {
            out.push(start..i);
            start = i;
            used = 0;
        }
        used += len;
    }
    if start < lengths.len() {
        out.push(start..lengths.len());
    }
    Ok(out)
}

/// [`batch_by_tokens`] over records, measuring sources in model tokens.
pub fn batch_records(records: &[ParallelRecord], vocab: &Vocab, budget: usize) -> Result<Vec<Range<usize>>> {
    let lengths: Vec<usize> = records.iter().map(|r| vocab.tokenize(&r.src).len()).collect();
    batch_by_tokens(&lengths, budget).map_err(|e| match e {
        Error::InvalidArgument(msg) => match lengths.iter().position(|&l| l > budget) {
            Some(i) => Error::InvalidArgument(format!("{msg} ({} source {:?})", records[i].direction(), records[i].src)),
            None => Error::InvalidArgument(msg),
        },
        other => other,
    })
}
