//! Four-stage bitext filtering: rules, language identification, semantic
//! similarity and quality estimation. Every stage returns an order-preserving
//! sub-list of its input plus a report whose counts telescope.

mod config;
mod langid;
mod pipeline;
mod qe;
mod report;
mod rules;
mod scorer;
mod semantic;

pub use config::{FilterConfig, Stage, StageToggles};
pub use langid::{train_langid, LangIdModel, LangIdScorer, MIN_SEED_SENTENCES};
pub use pipeline::{language_detection_filter, quality_estimation_filter, run_pipeline, semantic_filter, LangScorers, Scorers};
pub use qe::TeacherQe;
pub use report::{DropReason, DropSample, FilterReport, StageReport};
pub use rules::{rule_based_filter, strip_html};
pub use scorer::{check_score, Embedder, EmbeddingScorer, ExternalScorer, FnScorer, Scorer, TextScorer};
pub use semantic::PivotEmbedder;
