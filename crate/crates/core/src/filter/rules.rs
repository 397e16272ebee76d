use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::{is_nfc, UnicodeNormalization};

use super::config::{FilterConfig, Stage};
use super::report::{DropReason, DropSample, StageReport};
use crate::corpus::ParallelRecord;
use crate::error::Result;

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^<>]*>").expect("valid regex"));

/// Removes `<...>` spans and trims. Returns None when there was no tag.
pub fn strip_html(text: &str) -> Option<String> {
    if !TAG.is_match(text) {
        return None;
    }
    Some(TAG.replace_all(text, "").trim().to_string())
}

fn char_len(s: &str) -> usize {
    if is_nfc(s) {
        s.chars().count()
    } else {
        s.nfc().count()
    }
}

fn violation(r: &ParallelRecord, cfg: &FilterConfig) -> Option<DropReason> {
    if r.src.trim().is_empty() || r.tgt.trim().is_empty() {
        return Some(DropReason::Empty);
    }
    let (a, b) = (char_len(&r.src), char_len(&r.tgt));
    let (lo, hi) = (a.min(b), a.max(b));
    if lo < cfg.min_chars {
        Some(DropReason::MinLength)
    } else if hi > cfg.max_chars {
        Some(DropReason::MaxLength)
    } else if hi as f64 / lo as f64 > cfg.max_length_ratio {
        Some(DropReason::LengthRatio)
    } else {
        None
    }
}

/// Stage 1: strip tags, then drop empty, too short, too long and
/// badly proportioned pairs, then exact-pair duplicates (first wins).
pub fn rule_based_filter(records: &[ParallelRecord], cfg: &FilterConfig) -> Result<(Vec<ParallelRecord>, StageReport)> {
    cfg.validate()?;
    let mut report = StageReport::new(Stage::RuleBased, true, records.len());
    let mut seen = HashSet::new();
    let mut kept = Vec::with_capacity(records.len());
    for (index, original) in records.iter().enumerate() {
        let mut r = original.clone();
        let src = strip_html(&r.src);
        let tgt = strip_html(&r.tgt);
        if src.is_some() || tgt.is_some() {
            report.modified += 1;
        }
        if let Some(s) = src {
            r.src = s;
        }
        if let Some(t) = tgt {
            r.tgt = t;
        }
        let reason = violation(&r, cfg).or_else(|| (!seen.insert(r.pair_key())).then_some(DropReason::Duplicate));
        match reason {
            Some(reason) => report.record_drop(DropSample { index, src: r.src, tgt: r.tgt, reason, score: None }, cfg.max_samples),
            None => kept.push(r),
        }
    }
    report.check()?;
    Ok((kept, report))
}
