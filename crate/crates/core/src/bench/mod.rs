//! Throughput benchmarking, evaluation reports and run manifests.

mod batching;
mod emit;
mod manifest;
mod report;
mod throughput;

pub use batching::{batch_by_tokens, batch_records};
pub use emit::{emit_report, format_sig6, quality_efficiency_chart, ChartData, ChartPoint, ReportFormat, Tabular};
pub use manifest::{ArtifactRef, RunManifest, TOOLKIT_VERSION};
pub use report::{AggregateRow, EvalReport, EvalRow};
pub use throughput::{bench_throughput, evaluate_direction, DecodeConfig, Throughput};
