use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{AggregateRow, EvalReport, EvalRow};
use super::throughput::DecodeConfig;
use crate::compress::PruneReport;
use crate::error::{Error, Result};
use crate::filter::{DropReason, FilterReport};
use crate::util::atomic_write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::invalid(format!("unknown report format `{s}` (json or csv)"))),
        }
    }
}

/// Rounds to 6 significant digits and prints the shortest decimal form.
pub fn format_sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("scientific notation parses");
    rounded.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig6).unwrap_or_default()
}

/// Reports with a flat CSV view. Column order is part of the format.
pub trait Tabular: Serialize {
    fn csv_header() -> Vec<&'static str>;
    fn csv_records(&self) -> Vec<Vec<String>>;
}

/// Writes `report` to `path` atomically as pretty JSON (lossless) or CSV
/// (6 significant digits).
pub fn emit_report<R: Tabular>(report: &R, format: ReportFormat, path: &Path) -> Result<()> {
    let bytes = match format {
        ReportFormat::Json => {
            let mut b = serde_json::to_vec_pretty(report)?;
            b.push(b'\n');
            b
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(R::csv_header())?;
            for rec in report.csv_records() {
                w.write_record(rec)?;
            }
            w.into_inner().map_err(|e| Error::invalid(format!("csv buffer: {e}")))?
        }
    };
    atomic_write(path, &bytes)
}

const EVAL_HEADER: [&str; 13] = [
    "kind",
    "model",
    "direction",
    "segments",
    "bleu",
    "chrf_pp",
    "comet",
    "tokens_per_second",
    "total_seconds",
    "output_tokens",
    "beam_size",
    "batch_token_budget",
    "max_output_length",
];

impl Tabular for EvalReport {
    /// `kind` is `row` or `aggregate`; aggregates carry their group label in
    /// `direction` and their member count in `segments`, leaving the
    /// decode-specific columns empty.
    fn csv_header() -> Vec<&'static str> {
        EVAL_HEADER.to_vec()
    }

    fn csv_records(&self) -> Vec<Vec<String>> {
        let rows = self.rows.iter().map(|r| {
            vec![
                "row".into(),
                r.model.clone(),
                r.direction.to_string(),
                r.segments.to_string(),
                format_sig6(r.bleu),
                format_sig6(r.chrf_pp),
                opt(r.comet),
                format_sig6(r.tokens_per_second),
                format_sig6(r.total_seconds),
                r.output_tokens.to_string(),
                r.decode.beam_size.to_string(),
                r.decode.batch_token_budget.to_string(),
                r.decode.max_output_length.to_string(),
            ]
        });
        let aggs = self.aggregates.iter().map(|a| {
            vec![
                "aggregate".into(),
                a.model.clone(),
                a.group.clone(),
                a.members.to_string(),
                format_sig6(a.bleu),
                format_sig6(a.chrf_pp),
                String::new(),
                format_sig6(a.tokens_per_second),
                format_sig6(a.total_seconds),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]
        });
        rows.chain(aggs).collect()
    }
}

impl EvalReport {
    /// Parses the CSV view back. Decode fields absent from the CSV take
    /// their defaults.
    pub fn from_csv(text: &str) -> Result<EvalReport> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != EVAL_HEADER {
            return Err(Error::invalid(format!("unexpected eval report header {header:?}")));
        }
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::invalid(format!("bad number `{s}`"))) };
        let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::invalid(format!("bad integer `{s}`"))) };
        let mut report = EvalReport::default();
        for rec in rdr.records() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            match f(0) {
                "row" => report.rows.push(EvalRow {
                    model: f(1).into(),
                    direction: f(2).parse()?,
                    segments: int(f(3))?,
                    bleu: num(f(4))?,
                    chrf_pp: num(f(5))?,
                    comet: if f(6).is_empty() { None } else { Some(num(f(6))?) },
                    tokens_per_second: num(f(7))?,
                    total_seconds: num(f(8))?,
                    output_tokens: int(f(9))?,
                    decode: DecodeConfig { beam_size: int(f(10))?, batch_token_budget: int(f(11))?, max_output_length: int(f(12))?, ..DecodeConfig::default() },
                    warnings: Vec::new(),
                }),
                "aggregate" => report.aggregates.push(AggregateRow {
                    model: f(1).into(),
                    group: f(2).into(),
                    members: int(f(3))?,
                    bleu: num(f(4))?,
                    chrf_pp: num(f(5))?,
                    tokens_per_second: num(f(7))?,
                    total_seconds: num(f(8))?,
                }),
                other => return Err(Error::invalid(format!("unknown row kind `{other}`"))),
            }
        }
        Ok(report)
    }
}

impl Tabular for PruneReport {
    /// One line per candidate per iteration; `removed` marks the chosen
    /// layers and `tied` the candidates that matched the chosen score.
    fn csv_header() -> Vec<&'static str> {
        vec!["iteration", "layer", "chrf_pp", "removed", "tied", "remaining", "parameter_count"]
    }

    fn csv_records(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for it in &self.iterations {
            let rows: Vec<(String, Option<f64>)> = if it.candidates.is_empty() {
                it.removed.iter().map(|l| (l.to_string(), None)).collect()
            } else {
                it.candidates.iter().map(|c| (c.layer.to_string(), Some(c.chrf))).collect()
            };
            for (layer, chrf) in rows {
                out.push(vec![
                    it.iteration.to_string(),
                    layer.clone(),
                    opt(chrf),
                    it.removed.iter().any(|l| l.to_string() == layer).to_string(),
                    it.ties.iter().any(|l| l.to_string() == layer).to_string(),
                    it.remaining.len().to_string(),
                    it.parameter_count.to_string(),
                ]);
            }
        }
        out
    }
}

const DROP_REASONS: [DropReason; 8] = [
    DropReason::Empty,
    DropReason::MinLength,
    DropReason::MaxLength,
    DropReason::LengthRatio,
    DropReason::Duplicate,
    DropReason::LanguageId,
    DropReason::Semantic,
    DropReason::QualityEstimation,
];

impl Tabular for FilterReport {
    /// One line per stage with a dropped-count column per reason.
    fn csv_header() -> Vec<&'static str> {
        vec![
            "stage",
            "enabled",
            "input",
            "kept",
            "modified",
            "bypassed",
            "warnings",
            "dropped_empty",
            "dropped_min_length",
            "dropped_max_length",
            "dropped_length_ratio",
            "dropped_duplicate",
            "dropped_language_id",
            "dropped_semantic",
            "dropped_quality_estimation",
        ]
    }

    fn csv_records(&self) -> Vec<Vec<String>> {
        self.stages
            .iter()
            .map(|s| {
                let mut row = vec![
                    s.stage.to_string(),
                    s.enabled.to_string(),
                    s.input.to_string(),
                    s.kept.to_string(),
                    s.modified.to_string(),
                    s.bypassed.to_string(),
                    s.warnings.to_string(),
                ];
                row.extend(DROP_REASONS.iter().map(|r| s.dropped.get(r).copied().unwrap_or(0).to_string()));
                row
            })
            .collect()
    }
}

/// One point of a quality-versus-speed chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub model: String,
    pub chrf_pp: f64,
    pub tokens_per_second: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ChartData(pub Vec<ChartPoint>);

/// Per-model means over all rows, in first-appearance order.
pub fn quality_efficiency_chart(report: &EvalReport) -> ChartData {
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for r in &report.rows {
        if !acc.contains_key(&r.model) {
            order.push(r.model.clone());
        }
        let e = acc.entry(r.model.clone()).or_default();
        e.0 += r.chrf_pp;
        e.1 += r.tokens_per_second;
        e.2 += 1;
    }
    ChartData(
        order
            .into_iter()
            .map(|m| {
                let (c, t, n) = acc[&m];
                ChartPoint { model: m, chrf_pp: c / n as f64, tokens_per_second: t / n as f64 }
            })
            .collect(),
    )
}

impl Tabular for ChartData {
    fn csv_header() -> Vec<&'static str> {
        vec!["model", "chrf_pp", "tokens_per_second"]
    }

    fn csv_records(&self) -> Vec<Vec<String>> {
        self.0.iter().map(|p| vec![p.model.clone(), format_sig6(p.chrf_pp), format_sig6(p.tokens_per_second)]).collect()
    }
}
