use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::throughput::DecodeConfig;
use crate::error::{Error, Result};
use crate::lang::Direction;

/// One (model, direction) evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub direction: Direction,
    pub segments: usize,
    pub bleu: f64,
    pub chrf_pp: f64,
    /// Neural metric column; never computed by this toolkit, always `None`.
    pub comet: Option<f64>,
    pub tokens_per_second: f64,
    pub total_seconds: f64,
    pub output_tokens: usize,
    pub decode: DecodeConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Mean of a model's rows over a direction group: `xx-{tgt}` (into a
/// language), `{src}-xx` (out of a language) or `all`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub model: String,
    pub group: String,
    pub members: usize,
    pub bleu: f64,
    pub chrf_pp: f64,
    pub tokens_per_second: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub aggregates: Vec<AggregateRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn aggregate(model: &str, group: String, rows: &[&EvalRow]) -> AggregateRow {
    AggregateRow {
        model: model.to_string(),
        group,
        members: rows.len(),
        bleu: mean(rows.iter().map(|r| r.bleu)),
        chrf_pp: mean(rows.iter().map(|r| r.chrf_pp)),
        tokens_per_second: mean(rows.iter().map(|r| r.tokens_per_second)),
        total_seconds: mean(rows.iter().map(|r| r.total_seconds)),
    }
}

impl EvalReport {
    /// Builds the report and its aggregates. Groups with a single member are
    /// still emitted so every language appears.
    pub fn new(rows: Vec<EvalRow>) -> Self {
        let aggregates = Self::compute_aggregates(&rows);
        EvalReport { rows, aggregates }
    }

    fn compute_aggregates(rows: &[EvalRow]) -> Vec<AggregateRow> {
        let mut models: Vec<&str> = Vec::new();
        for r in rows {
            if !models.contains(&r.model.as_str()) {
                models.push(&r.model);
            }
        }
        let mut out = Vec::new();
        for m in models {
            let mine: Vec<&EvalRow> = rows.iter().filter(|r| r.model == m).collect();
            let mut groups: BTreeMap<String, Vec<&EvalRow>> = BTreeMap::new();
            for r in &mine {
                groups.entry(format!("xx-{}", r.direction.tgt)).or_default().push(r);
                groups.entry(format!("{}-xx", r.direction.src)).or_default().push(r);
            }
            out.extend(groups.into_iter().map(|(g, rs)| aggregate(m, g, &rs)));
            out.push(aggregate(m, "all".into(), &mine));
        }
        out
    }

    /// Recomputes the aggregates from the rows and compares to 1e-9.
    pub fn check(&self) -> Result<()> {
        let expect = Self::compute_aggregates(&self.rows);
        if expect.len() != self.aggregates.len() {
            return Err(Error::invalid(format!("report has {} aggregate rows, rows imply {}", self.aggregates.len(), expect.len())));
        }
        for (e, a) in expect.iter().zip(&self.aggregates) {
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 || (x.is_nan() && y.is_nan());
            if e.model != a.model
                || e.group != a.group
                || e.members != a.members
                || !close(e.bleu, a.bleu)
                || !close(e.chrf_pp, a.chrf_pp)
                || !close(e.tokens_per_second, a.tokens_per_second)
                || !close(e.total_seconds, a.total_seconds)
            {
                return Err(Error::invalid(format!("aggregate {}/{} does not match its rows", a.model, a.group)));
            }
        }
        Ok(())
    }

    /// The report with wall-clock fields zeroed, for run-to-run comparison.
    pub fn without_timings(&self) -> EvalReport {
        let rows = self.rows.iter().map(|r| EvalRow { tokens_per_second: 0.0, total_seconds: 0.0, ..r.clone() }).collect();
        EvalReport::new(rows)
    }
}
