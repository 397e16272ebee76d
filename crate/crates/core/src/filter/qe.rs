use std::sync::Arc;

use super::scorer::{check_score, Scorer};
use crate::corpus::ParallelRecord;
use crate::error::Result;
use crate::lang::LangCode;
use crate::model::TranslationModel;
use crate::numerics::Scalar;

/// Reference-free quality score from a teacher model: the mean per-token
/// forced log-probability of the target (eos included), passed through
/// `1 / (1 + exp(-(x - midpoint) / scale))`.
pub struct TeacherQe<T> {
    model: Arc<TranslationModel<T>>,
    pub midpoint: f64,
    pub scale: f64,
}

impl<T: Scalar> TeacherQe<T> {
    pub const DEFAULT_MIDPOINT: f64 = -1.0;
    pub const DEFAULT_SCALE: f64 = 0.25;

    pub fn new(model: Arc<TranslationModel<T>>) -> Self {
        TeacherQe { model, midpoint: Self::DEFAULT_MIDPOINT, scale: Self::DEFAULT_SCALE }
    }

    /// Mean log-probability per target token; `-inf` if a target character
    /// is outside the model vocabulary.
    pub fn mean_log_prob(&self, r: &ParallelRecord) -> Result<f64> {
        let v = self.model.vocab();
        let (lp, n) = self.model.forced_log_prob(&r.src_lang, &v.tokenize(&r.src), &r.tgt_lang, &v.tokenize(&r.tgt))?;
        Ok(lp / n as f64)
    }
}

impl<T: Scalar> Scorer for TeacherQe<T> {
    fn name(&self) -> &str {
        "teacher-qe"
    }

    fn supports(&self, lang: &LangCode) -> bool {
        self.model.vocab().lang_tag(lang).is_ok()
    }

    fn score(&self, r: &ParallelRecord) -> Result<f64> {
        let x = self.mean_log_prob(r)?;
        let s = if x == f64::NEG_INFINITY { 0.0 } else { 1.0 / (1.0 + (-(x - self.midpoint) / self.scale).exp()) };
        check_score(self.name(), s)
    }
}
