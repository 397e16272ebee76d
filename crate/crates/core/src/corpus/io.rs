//! Corpus files. JSONL is canonical: one object per line with `src_lang`,
//! `tgt_lang`, `src`, `tgt` and optional `origin`.
//!
//! TSV is accepted for ingestion: no header, columns `src_lang`, `tgt_lang`,
//! `src`, `tgt` and an optional fifth `origin`. A field may be wrapped in
//! double quotes, in which case it may contain tabs and newlines and a
//! literal quote is written as two quotes. Unquoted fields are taken verbatim.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::ParallelRecord;
use crate::error::{Error, Result};
use crate::lang::LangCode;
use crate::util::atomic_write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "jsonl" | "json" => Some(CorpusFormat::Jsonl),
            "tsv" | "txt" => Some(CorpusFormat::Tsv),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MalformedLine {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadReport {
    pub lines: usize,
    pub records: usize,
    pub malformed: Vec<MalformedLine>,
}

/// Share of malformed lines above which a read fails outright.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Deserialize)]
struct JsonRecord {
    src_lang: String,
    tgt_lang: String,
    src: String,
    tgt: String,
    #[serde(default)]
    origin: Option<String>,
}

fn build(src_lang: &str, tgt_lang: &str, src: &str, tgt: &str, origin: Option<&str>, default_origin: &str) -> Result<ParallelRecord> {
    let s: LangCode = src_lang.parse()?;
    let t: LangCode = tgt_lang.parse()?;
    Ok(ParallelRecord::new(s, t, src, tgt, origin.unwrap_or(default_origin)))
}

pub fn read_corpus(path: &Path, format: CorpusFormat) -> Result<(Vec<ParallelRecord>, ReadReport)> {
    let corpus_err = |message: String| Error::Corpus { path: path.to_path_buf(), message };
    let file = File::open(path).map_err(|e| corpus_err(format!("cannot open: {e}")))?;
    let default_origin = path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus").to_string();
    let mut records = Vec::new();
    let mut report = ReadReport::default();
    match format {
        CorpusFormat::Jsonl => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| corpus_err(format!("read failed at line {}: {e}", i + 1)))?;
                if line.trim().is_empty() {
                    continue;
                }
                report.lines += 1;
                let parsed = serde_json::from_str::<JsonRecord>(&line)
                    .map_err(Error::from)
                    .and_then(|r| build(&r.src_lang, &r.tgt_lang, &r.src, &r.tgt, r.origin.as_deref(), &default_origin));
                match parsed {
                    Ok(r) => records.push(r),
                    Err(e) => report.malformed.push(MalformedLine { line: i + 1, message: e.to_string() }),
                }
            }
        }
        CorpusFormat::Tsv => {
            let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').has_headers(false).flexible(true).quoting(true).double_quote(true).from_reader(file);
            for row in rdr.records() {
                let row = match row {
                    Ok(r) => r,
                    Err(e) => {
                        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                        if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                            return Err(corpus_err(format!("read failed: {e}")));
                        }
                        report.lines += 1;
                        report.malformed.push(MalformedLine { line, message: e.to_string() });
                        continue;
                    }
                };
                let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
                if row.len() == 1 && row[0].trim().is_empty() {
                    continue;
                }
                report.lines += 1;
                let parsed = if row.len() == 4 || row.len() == 5 {
                    build(&row[0], &row[1], &row[2], &row[3], row.get(4), &default_origin)
                } else {
                    Err(Error::invalid(format!("expected 4 or 5 columns, found {}", row.len())))
                };
                match parsed {
                    Ok(r) => records.push(r),
                    Err(e) => report.malformed.push(MalformedLine { line, message: e.to_string() }),
                }
            }
        }
    }
    report.records = records.len();
    if report.lines > 0 && report.malformed.len() as f64 > MAX_MALFORMED_FRACTION * report.lines as f64 {
        return Err(corpus_err(format!(
            "{} of {} lines malformed (limit {:.0}%); first: line {}: {}",
            report.malformed.len(),
            report.lines,
            MAX_MALFORMED_FRACTION * 100.0,
            report.malformed[0].line,
            report.malformed[0].message
        )));
    }
    Ok((records, report))
}

/// JSONL text for `records`; flags are included when present.
pub fn to_jsonl(records: &[ParallelRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes JSONL atomically (temp file, then rename).
pub fn write_jsonl(records: &[ParallelRecord], path: &Path) -> Result<()> {
    atomic_write(path, to_jsonl(records)?.as_bytes())
}

/// Writes JSONL through an arbitrary writer.
pub fn write_jsonl_to(records: &[ParallelRecord], w: &mut impl Write) -> Result<()> {
    w.write_all(to_jsonl(records)?.as_bytes())?;
    Ok(())
}
