//! Fine-tuning, layer pruning, distillation and the staged compression run.

mod distill;
mod eval;
mod pipeline;
mod prune;
mod train;

pub use distill::{count_synthetic, distill, kd_overlap, reproduction_rate, DistillConfig, DistillReport, KD_ORIGIN};
pub use eval::{chrf_by_direction, mean_chrf, translate_records, DEV_BATCH};
pub use pipeline::{run_compression_pipeline, CompressionConfig, CompressionOutcome, PipelineInputs, StageManifest};
pub use prune::{
    importance_baseline, iterative_prune, layer_importance_eval, middle_block, middle_prune, prune, remove_layer, CandidateScore, ImportanceMetric, LayerId, PruneConfig,
    PruneIteration, PruneReport, PruneSides, PruneStrategy, TieBreak,
};
pub use train::{dev_loss, train, train_with_monitor, EarlyStopper, EvalPoint, StopReason, TrainConfig, TrainLog};
