use serde::{Deserialize, Serialize};

use crate::corpus::ParallelRecord;
use crate::error::{Error, Result};
use crate::model::{Example, TranslationModel};
use crate::numerics::{adam_step, AdamState, Graph, Scalar, SeededRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub grad_accum_steps: usize,
    /// Measured in optimizer updates.
    pub eval_every_steps: usize,
    /// Non-improving evaluations tolerated; one more stops training.
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    /// Extra hard cap on optimizer updates.
    pub max_steps: Option<usize>,
    pub label_smoothing: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            batch_size: 8,
            grad_accum_steps: 4,
            eval_every_steps: 1000,
            early_stop_patience: 10,
            max_epochs: 10,
            max_steps: None,
            label_smoothing: 0.1,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate)));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("grad_accum_steps", self.grad_accum_steps),
            ("eval_every_steps", self.eval_every_steps),
            ("early_stop_patience", self.early_stop_patience),
            ("max_epochs", self.max_epochs),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.max_steps == Some(0) {
            return Err(Error::config("max_steps must be positive when set"));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::config(format!("label_smoothing {} outside [0, 1)", self.label_smoothing)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
    MaxSteps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// 1-based evaluation number.
    pub eval: usize,
    pub step: usize,
    pub epoch: usize,
    /// Mean training loss over the updates since the previous evaluation.
    pub train_loss: f64,
    pub dev_loss: f64,
    pub improved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub initial_dev_loss: f64,
    pub evals: Vec<EvalPoint>,
    pub best_eval: usize,
    pub best_dev_loss: f64,
    pub steps: usize,
    pub epochs_completed: usize,
    pub stop_reason: StopReason,
}

/// Tracks the best dev loss and decides when patience runs out.
#[derive(Clone, Debug)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_eval: usize,
    bad: usize,
    evals: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper { patience, best: f64::INFINITY, best_eval: 0, bad: 0, evals: 0 }
    }

    /// Returns (improved, stop).
    pub fn observe(&mut self, loss: f64) -> (bool, bool) {
        self.evals += 1;
        let improved = loss < self.best;
        if improved {
            self.best = loss;
            self.best_eval = self.evals;
            self.bad = 0;
        } else {
            self.bad += 1;
        }
        (improved, self.bad > self.patience)
    }

    pub fn best_eval(&self) -> usize {
        self.best_eval
    }
}

fn examples<T: Scalar>(model: &TranslationModel<T>, records: &[ParallelRecord]) -> Result<Vec<Example>> {
    records
        .iter()
        .map(|r| {
            let ex = model.example_from_text(&r.src_lang, &r.src, &r.tgt_lang, &r.tgt)?;
            model.check_length(ex.encoder_input.len().max(ex.decoder_input.len()))?;
            Ok(ex)
        })
        .collect()
}

/// Token-weighted mean cross-entropy (no smoothing) over `records`.
pub fn dev_loss<T: Scalar>(model: &TranslationModel<T>, records: &[ParallelRecord], batch_size: usize) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("dev corpus is empty"));
    }
    let exs = examples(model, records)?;
    let mut total = 0.0;
    let mut tokens = 0usize;
    for chunk in exs.chunks(batch_size.max(1)) {
        let batch: Vec<&Example> = chunk.iter().collect();
        let n: usize = chunk.iter().map(|e| e.targets.iter().filter(|&&t| t != crate::model::vocab::PAD).count()).sum();
        let mut g = Graph::new();
        let p = model.params().try_map(&mut |t| g.constant(t.shape().to_vec(), t.data().to_vec()))?;
        let loss = model.batch_loss(&mut g, &p, &batch, 0.0, None)?;
        total += g.value(loss)[0].f64() * n as f64;
        tokens += n;
    }
    Ok(total / tokens as f64)
}

/// Teacher-forced training with gradient accumulation and early stopping on
/// dev loss. Returns the parameters of the best evaluation.
pub fn train<T: Scalar>(model: &TranslationModel<T>, train_set: &[ParallelRecord], dev_set: &[ParallelRecord], cfg: &TrainConfig) -> Result<(TranslationModel<T>, TrainLog)> {
    train_with_monitor(model, train_set, dev_set, cfg, |_, _| Ok(()))
}

fn as_divergence(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite(what) => Error::Diverged { step, message: format!("NaN or infinite value in {what}") },
        other => other,
    }
}

/// As [`train`], calling `monitor` after every evaluation.
pub fn train_with_monitor<T: Scalar>(
    model: &TranslationModel<T>,
    train_set: &[ParallelRecord],
    dev_set: &[ParallelRecord],
    cfg: &TrainConfig,
    mut monitor: impl FnMut(&TranslationModel<T>, &EvalPoint) -> Result<()>,
) -> Result<(TranslationModel<T>, TrainLog)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    if dev_set.is_empty() {
        return Err(Error::invalid("dev corpus is empty"));
    }
    let mut model = model.clone();
    let train_ex = examples(&model, train_set)?;
    examples(&model, dev_set)?;
    let eval_batch = cfg.batch_size * cfg.grad_accum_steps;
    let initial_dev_loss = dev_loss(&model, dev_set, eval_batch).map_err(|e| as_divergence(e, 0))?;

    let root = SeededRng::new(cfg.seed).split("train");
    let mut dropout_rng = root.split("dropout");
    let mut opt: AdamState<T> = AdamState::new(model.tensors().iter().map(|(_, t)| t.numel()));
    let mut stopper = EarlyStopper::new(cfg.early_stop_patience);
    let mut best = model.clone();
    let mut evals = Vec::new();
    let (mut step, mut micro, mut since_eval_loss, mut since_eval_n) = (0usize, 0usize, 0.0, 0usize);
    let mut epochs_completed = 0;
    let mut stop_reason = StopReason::MaxEpochs;
    let scale = T::of(1.0 / cfg.grad_accum_steps as f64);
    model.zero_grad();

    let mut evaluate = |model: &TranslationModel<T>, step: usize, epoch: usize, loss_sum: f64, n: usize, best: &mut TranslationModel<T>| -> Result<bool> {
        let dl = dev_loss(model, dev_set, eval_batch).map_err(|e| as_divergence(e, step))?;
        if !dl.is_finite() {
            return Err(Error::Diverged { step, message: format!("dev loss {dl}") });
        }
        let (improved, stop) = stopper.observe(dl);
        if improved {
            *best = model.clone();
        }
        let point = EvalPoint { eval: evals.len() + 1, step, epoch, train_loss: loss_sum / n.max(1) as f64, dev_loss: dl, improved };
        monitor(model, &point)?;
        evals.push(point);
        Ok(stop)
    };

    'epochs: for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..train_ex.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut root.split_index("epoch", epoch as u64));
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        for (bi, idx) in batches.iter().enumerate() {
            let batch: Vec<&Example> = idx.iter().map(|&i| &train_ex[i]).collect();
            let mut g = Graph::new();
            let p = model.bind(&mut g).map_err(|e| as_divergence(e, step))?;
            let loss = model.batch_loss(&mut g, &p, &batch, cfg.label_smoothing, Some(&mut dropout_rng)).map_err(|e| as_divergence(e, step))?;
            let lv = g.value(loss)[0].f64();
            if !lv.is_finite() {
                let first = idx.first().map(|&i| &train_set[i]);
                return Err(Error::Diverged { step, message: format!("training loss {lv} at epoch {epoch}, micro-batch {bi} (first record {first:?}), lr {}", cfg.learning_rate) });
            }
            let scaled = g.scale(loss, scale)?;
            let grads = g.backward(scaled)?;
            model.accumulate_grads(&p, &grads)?;
            micro += 1;
            let last_of_run = epoch + 1 == cfg.max_epochs && bi + 1 == batches.len();
            if micro % cfg.grad_accum_steps != 0 && !last_of_run {
                since_eval_loss += lv;
                since_eval_n += 1;
                continue;
            }
            since_eval_loss += lv;
            since_eval_n += 1;
            adam_step(&mut model.tensors_mut(), &mut opt, cfg.learning_rate).map_err(|e| Error::Diverged { step, message: e.to_string() })?;
            model.zero_grad();
            step += 1;
            let at_cap = cfg.max_steps.is_some_and(|m| step >= m);
            if step % cfg.eval_every_steps == 0 || at_cap || last_of_run {
                let stop = evaluate(&model, step, epoch, since_eval_loss, since_eval_n, &mut best)?;
                since_eval_loss = 0.0;
                since_eval_n = 0;
                if stop {
                    stop_reason = StopReason::EarlyStopping;
                    break 'epochs;
                }
            }
            if at_cap {
                stop_reason = StopReason::MaxSteps;
                break 'epochs;
            }
        }
        epochs_completed = epoch + 1;
    }
    let best_eval = stopper.best_eval();
    let best_dev_loss = evals[best_eval - 1].dev_loss;
    Ok((best, TrainLog { initial_dev_loss, evals, best_eval, best_dev_loss, steps: step, epochs_completed, stop_reason }))
}
