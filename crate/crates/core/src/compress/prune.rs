use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::translate_records;
use crate::corpus::ParallelRecord;
use crate::error::{Error, Result};
use crate::lang::{Direction, LangCode};
use crate::metrics::{chrf_pp, ChrfConfig};
use crate::model::checkpoint::{checkpoint_bytes, fingerprint};
use crate::model::{remove_layers, SearchConfig, Side, TranslationModel};
use crate::numerics::Scalar;

/// A layer named by its side and its index in the unpruned model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerId {
    pub side: Side,
    pub origin: usize,
}

impl LayerId {
    pub fn new(side: Side, origin: usize) -> Self {
        LayerId { side, origin }
    }
}

/// Tie-break order: lower original index first, encoder before decoder.
impl Ord for LayerId {
    fn cmp(&self, o: &Self) -> Ordering {
        self.origin.cmp(&o.origin).then(self.side.cmp(&o.side))
    }
}

impl PartialOrd for LayerId {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.side, self.origin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneSides {
    DecoderOnly,
    EncoderDecoder,
}

impl PruneSides {
    pub fn sides(self) -> &'static [Side] {
        match self {
            PruneSides::DecoderOnly => &[Side::Decoder],
            PruneSides::EncoderDecoder => &[Side::Encoder, Side::Decoder],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneStrategy {
    Iterative,
    Middle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMetric {
    #[default]
    ChrfPlusPlus,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Lowest original layer index; encoder before decoder at equal index.
    #[default]
    LowestOriginalIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    pub target_removals: usize,
    pub sides: PruneSides,
    pub strategy: PruneStrategy,
    pub importance_metric: ImportanceMetric,
    /// Directions whose dev sets score each candidate; mean over them.
    pub importance_directions: Vec<Direction>,
    pub tie_break: TieBreak,
    /// Decoding inside the importance loop.
    pub search: SearchConfig,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            target_removals: 4,
            sides: PruneSides::DecoderOnly,
            strategy: PruneStrategy::Iterative,
            importance_metric: ImportanceMetric::ChrfPlusPlus,
            importance_directions: Vec::new(),
            tie_break: TieBreak::LowestOriginalIndex,
            search: SearchConfig { beam_size: 1, max_len: 200, length_penalty: 1.0 },
        }
    }
}

impl PruneConfig {
    /// Directions present in `dev` whose target is not `base`.
    pub fn default_directions(dev: &[ParallelRecord], base: &LangCode) -> Vec<Direction> {
        dev.iter().map(ParallelRecord::direction).filter(|d| &d.tgt != base).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn validate<T: Scalar>(&self, model: &TranslationModel<T>) -> Result<()> {
        if self.search.beam_size == 0 || self.search.max_len == 0 {
            return Err(Error::config("importance search needs beam_size and max_len >= 1"));
        }
        let n = self.target_removals;
        match (self.strategy, self.sides) {
            (PruneStrategy::Middle, PruneSides::EncoderDecoder) if n % 2 == 1 => {
                return Err(Error::config(format!("middle pruning of both stacks splits n evenly; n = {n} is odd")))
            }
            _ => {}
        }
        let per_side = |side: Side| match (self.strategy, self.sides) {
            (PruneStrategy::Middle, PruneSides::EncoderDecoder) => (n / 2, model.layer_count(side)),
            _ => (n, model.layer_count(side)),
        };
        match self.sides {
            PruneSides::DecoderOnly => {
                let (k, l) = per_side(Side::Decoder);
                if k >= l {
                    return Err(Error::config(format!("cannot remove {k} of {l} decoder layers")));
                }
            }
            PruneSides::EncoderDecoder if self.strategy == PruneStrategy::Middle => {
                for side in [Side::Encoder, Side::Decoder] {
                    let (k, l) = per_side(side);
                    if k >= l {
                        return Err(Error::config(format!("cannot remove {k} of {l} {side} layers")));
                    }
                }
            }
            PruneSides::EncoderDecoder => {
                let spare = model.layer_count(Side::Encoder) + model.layer_count(Side::Decoder) - 2;
                if n > spare {
                    return Err(Error::config(format!("cannot remove {n} layers while keeping one per stack ({spare} removable)")));
                }
            }
        }
        if self.strategy == PruneStrategy::Iterative && n > 0 && self.importance_directions.is_empty() {
            return Err(Error::config("importance_directions must not be empty"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub layer: LayerId,
    pub chrf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneIteration {
    pub iteration: usize,
    /// Layers on the targeted sides before this iteration's removal.
    pub remaining: Vec<LayerId>,
    /// Empty for middle pruning, which scores nothing.
    pub candidates: Vec<CandidateScore>,
    pub removed: Vec<LayerId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_score: Option<f64>,
    /// Other candidates that tied with the chosen score.
    pub ties: Vec<LayerId>,
    pub parameter_count: usize,
    pub model_fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub strategy: PruneStrategy,
    pub config: PruneConfig,
    pub initial_parameter_count: usize,
    pub iterations: Vec<PruneIteration>,
    pub final_encoder_layers: Vec<usize>,
    pub final_decoder_layers: Vec<usize>,
}

impl PruneReport {
    /// The removal sequence of an iterative report.
    pub fn removal_sequence(&self) -> Vec<LayerId> {
        self.iterations.iter().flat_map(|i| i.removed.iter().copied()).collect()
    }

    /// Greedy audit: one removal per iteration, n iterations, chosen layer
    /// scores the maximum with the tie-break applied, remaining sets chain,
    /// parameter count strictly decreases.
    pub fn audit(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(format!("prune report audit: {m}")));
        if self.strategy == PruneStrategy::Middle {
            if self.iterations.len() != 1 || self.iterations[0].removed.len() != self.config.target_removals {
                return fail("middle pruning must be one iteration removing n layers".into());
            }
            return Ok(());
        }
        if self.iterations.len() != self.config.target_removals {
            return fail(format!("{} iterations for n = {}", self.iterations.len(), self.config.target_removals));
        }
        let mut params = self.initial_parameter_count;
        let mut expected_remaining: Option<Vec<LayerId>> = None;
        for it in &self.iterations {
            let [chosen] = it.removed[..] else {
                return fail(format!("iteration {} removed {} layers", it.iteration, it.removed.len()));
            };
            if let Some(exp) = &expected_remaining {
                if exp != &it.remaining {
                    return fail(format!("iteration {} starts from {:?}, expected {:?}", it.iteration, it.remaining, exp));
                }
            }
            let max = it.candidates.iter().map(|c| c.chrf).fold(f64::NEG_INFINITY, f64::max);
            let Some(score) = it.candidates.iter().find(|c| c.layer == chosen).map(|c| c.chrf) else {
                return fail(format!("iteration {}: chosen {chosen} was not a candidate", it.iteration));
            };
            if score != max || it.chosen_score != Some(score) {
                return fail(format!("iteration {}: chosen {chosen} scores {score}, max is {max}", it.iteration));
            }
            let first = it.candidates.iter().filter(|c| c.chrf == max).map(|c| c.layer).min().expect("nonempty");
            if first != chosen {
                return fail(format!("iteration {}: tie-break should pick {first}, picked {chosen}", it.iteration));
            }
            if it.parameter_count >= params {
                return fail(format!("iteration {}: parameter count did not shrink", it.iteration));
            }
            params = it.parameter_count;
            expected_remaining = Some(it.remaining.iter().copied().filter(|&l| l != chosen).collect());
        }
        Ok(())
    }
}

fn model_fingerprint<T: Scalar>(model: &TranslationModel<T>) -> Result<String> {
    Ok(fingerprint(&checkpoint_bytes(model, &BTreeMap::new())?))
}

fn layers_on<T: Scalar>(model: &TranslationModel<T>, sides: &[Side]) -> Vec<LayerId> {
    let mut out: Vec<LayerId> = sides.iter().flat_map(|&s| model.layer_origins(s).into_iter().map(move |o| LayerId::new(s, o))).collect();
    out.sort();
    out
}

/// Removes one layer named by its original index.
pub fn remove_layer<T: Scalar>(model: &TranslationModel<T>, layer: LayerId) -> Result<TranslationModel<T>> {
    let pos = model.layer_origins(layer.side).iter().position(|&o| o == layer.origin).ok_or_else(|| Error::invalid(format!("layer {layer} is not in the model")))?;
    remove_layers(model, layer.side, &[pos])
}

/// Dev records of the importance directions; each direction must have some.
fn importance_dev(dev: &[ParallelRecord], directions: &[Direction]) -> Result<Vec<ParallelRecord>> {
    let wanted: BTreeSet<&Direction> = directions.iter().collect();
    let picked: Vec<ParallelRecord> = dev.iter().filter(|r| wanted.contains(&r.direction())).cloned().collect();
    for d in directions {
        if !picked.iter().any(|r| &r.direction() == d) {
            return Err(Error::invalid(format!("no dev records for importance direction {d}")));
        }
    }
    Ok(picked)
}

/// Mean over directions of corpus chrF++ on `dev`.
fn score_model<T: Scalar>(model: &TranslationModel<T>, dev: &[ParallelRecord], directions: &[Direction], search: &SearchConfig) -> Result<f64> {
    let cfg = ChrfConfig::default();
    let hyps = translate_records(model, dev, search)?;
    let mut total = 0.0;
    for d in directions {
        let (h, r): (Vec<&str>, Vec<&str>) = dev.iter().zip(&hyps).filter(|(rec, _)| &rec.direction() == d).map(|(rec, h)| (h.as_str(), rec.tgt.as_str())).unzip();
        total += chrf_pp(&h, &r, &cfg)?.value;
    }
    Ok(total / directions.len() as f64)
}

/// Mean dev chrF++ of the model without each candidate layer, evaluated
/// independently (in parallel) with no retraining. Candidates are the layers
/// on `sides` whose stack has at least two layers.
pub fn layer_importance_eval<T: Scalar>(
    model: &TranslationModel<T>,
    sides: &[Side],
    dev: &[ParallelRecord],
    directions: &[Direction],
    search: &SearchConfig,
) -> Result<BTreeMap<LayerId, f64>> {
    if directions.is_empty() {
        return Err(Error::invalid("importance evaluation needs at least one direction"));
    }
    let dev = importance_dev(dev, directions)?;
    let candidates: Vec<LayerId> = layers_on(model, sides).into_iter().filter(|l| model.layer_count(l.side) >= 2).collect();
    let scores: Vec<(LayerId, f64)> = candidates.par_iter().map(|&l| Ok((l, score_model(&remove_layer(model, l)?, &dev, directions, search)?))).collect::<Result<_>>()?;
    Ok(scores.into_iter().collect())
}

/// Mean dev chrF++ of the unmodified model on the importance directions.
pub fn importance_baseline<T: Scalar>(model: &TranslationModel<T>, dev: &[ParallelRecord], directions: &[Direction], search: &SearchConfig) -> Result<f64> {
    score_model(model, &importance_dev(dev, directions)?, directions, search)
}

fn finish<T: Scalar>(model: &TranslationModel<T>, cfg: &PruneConfig, initial: usize, iterations: Vec<PruneIteration>) -> PruneReport {
    PruneReport {
        strategy: cfg.strategy,
        config: cfg.clone(),
        initial_parameter_count: initial,
        iterations,
        final_encoder_layers: model.layer_origins(Side::Encoder),
        final_decoder_layers: model.layer_origins(Side::Decoder),
    }
}

/// Greedy pruning: n times, drop the layer whose removal keeps the highest
/// mean dev chrF++. No fine-tuning between iterations.
pub fn iterative_prune<T: Scalar>(model: &TranslationModel<T>, cfg: &PruneConfig, dev: &[ParallelRecord]) -> Result<(TranslationModel<T>, PruneReport)> {
    let cfg = PruneConfig { strategy: PruneStrategy::Iterative, ..cfg.clone() };
    cfg.validate(model)?;
    let sides = cfg.sides.sides();
    let initial = model.parameter_count();
    let mut current = model.clone();
    let mut iterations = Vec::new();
    for iteration in 1..=cfg.target_removals {
        let remaining = layers_on(&current, sides);
        let scores = layer_importance_eval(&current, sides, dev, &cfg.importance_directions, &cfg.search)?;
        let max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
        // BTreeMap iterates in tie-break order, so the first maximum wins
        let chosen = *scores.iter().find(|(_, &s)| s == max).ok_or_else(|| Error::invalid("no removable layer left"))?.0;
        let ties = scores.iter().filter(|(&l, &s)| s == max && l != chosen).map(|(&l, _)| l).collect();
        current = remove_layer(&current, chosen)?;
        iterations.push(PruneIteration {
            iteration,
            remaining,
            candidates: scores.iter().map(|(&layer, &chrf)| CandidateScore { layer, chrf }).collect(),
            removed: vec![chosen],
            chosen_score: Some(max),
            ties,
            parameter_count: current.parameter_count(),
            model_fingerprint: model_fingerprint(&current)?,
        });
    }
    let report = finish(&current, &cfg, initial, iterations);
    Ok((current, report))
}

/// Stack positions of the centered block of `n` layers out of `l`.
pub fn middle_block(l: usize, n: usize) -> Result<Vec<usize>> {
    if n >= l {
        return Err(Error::invalid(format!("cannot remove {n} of {l} layers")));
    }
    let start = (l - n) / 2;
    Ok((start..start + n).collect())
}

/// Removes the centered contiguous block of layers. With both stacks
/// targeted, each side loses n/2.
pub fn middle_prune<T: Scalar>(model: &TranslationModel<T>, cfg: &PruneConfig) -> Result<(TranslationModel<T>, PruneReport)> {
    let cfg = PruneConfig { strategy: PruneStrategy::Middle, ..cfg.clone() };
    cfg.validate(model)?;
    let per_side = match cfg.sides {
        PruneSides::DecoderOnly => cfg.target_removals,
        PruneSides::EncoderDecoder => cfg.target_removals / 2,
    };
    let sides = cfg.sides.sides();
    let remaining = layers_on(model, sides);
    let mut current = model.clone();
    let mut removed = Vec::new();
    for &side in sides {
        let block = middle_block(current.layer_count(side), per_side)?;
        let origins = current.layer_origins(side);
        removed.extend(block.iter().map(|&p| LayerId::new(side, origins[p])));
        current = remove_layers(&current, side, &block)?;
    }
    removed.sort();
    let iteration = PruneIteration {
        iteration: 1,
        remaining,
        candidates: Vec::new(),
        removed,
        chosen_score: None,
        ties: Vec::new(),
        parameter_count: current.parameter_count(),
        model_fingerprint: model_fingerprint(&current)?,
    };
    let report = finish(&current, &cfg, model.parameter_count(), vec![iteration]);
    Ok((current, report))
}

/// Dispatches on `cfg.strategy`.
pub fn prune<T: Scalar>(model: &TranslationModel<T>, cfg: &PruneConfig, dev: &[ParallelRecord]) -> Result<(TranslationModel<T>, PruneReport)> {
    match cfg.strategy {
        PruneStrategy::Iterative => iterative_prune(model, cfg, dev),
        PruneStrategy::Middle => middle_prune(model, cfg),
    }
}
