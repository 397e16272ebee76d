//! Beam and greedy search over any incremental scorer.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source of next-token log-probabilities for a set of live rows.
pub trait IncrementalScorer {
    fn vocab_size(&self) -> usize;
    fn eos(&self) -> usize;
    /// One row per source sentence; returns `[n_sources x vocab]`.
    fn start(&mut self) -> Result<Vec<f64>>;
    /// New row `i` continues old row `parents[i]` with `tokens[i]`; returns
    /// `[parents.len() x vocab]`.
    fn advance(&mut self, parents: &[usize], tokens: &[usize]) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub beam_size: usize,
    /// Maximum number of generated tokens, eos included.
    pub max_len: usize,
    pub length_penalty: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { beam_size: 4, max_len: 200, length_penalty: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Generated tokens without the final eos.
    pub tokens: Vec<usize>,
    /// Sum of token log-probabilities, eos included when present.
    pub log_prob: f64,
    /// `log_prob / len^length_penalty`, len counting eos.
    pub score: f64,
    pub finished: bool,
}

/// Length-normalized score.
pub fn normalized_score(log_prob: f64, len: usize, length_penalty: f64) -> f64 {
    log_prob / (len.max(1) as f64).powf(length_penalty)
}

/// Preference order of finished hypotheses: higher score, then
/// lexicographically smaller tokens (a prefix sorts first, so shorter wins).
pub fn hypothesis_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens))
}

struct Beam {
    row: usize,
    tokens: Vec<usize>,
    log_prob: f64,
}

struct SentenceState {
    alive: Vec<Beam>,
    finished: Vec<Hypothesis>,
    done: bool,
}

impl SentenceState {
    fn finish(&mut self, tokens: Vec<usize>, log_prob: f64, eos: bool, lp: f64) {
        let len = tokens.len() + usize::from(eos);
        self.finished.push(Hypothesis { score: normalized_score(log_prob, len, lp), tokens, log_prob, finished: eos });
    }
}

fn check(cfg: &SearchConfig) -> Result<()> {
    if cfg.beam_size == 0 {
        return Err(Error::invalid("beam_size must be at least 1"));
    }
    if !cfg.length_penalty.is_finite() {
        return Err(Error::invalid("length_penalty must be finite"));
    }
    Ok(())
}

fn check_row_count(lp: &[f64], rows: usize, v: usize) -> Result<()> {
    if lp.len() != rows * v {
        return Err(Error::shape(format!("scorer returned {} values for {rows} rows of {v}", lp.len())));
    }
    Ok(())
}

/// Beam search with a candidate pool of `2 * beam_size` per step. A candidate
/// ending in eos that ranks within the first `beam_size` becomes finished;
/// the best `beam_size` non-eos candidates stay alive. A sentence stops once
/// it holds `beam_size` finished hypotheses; at `max_len` the alive beams are
/// closed unfinished. Ties among candidates break on smaller token sequence.
pub fn beam_search<S: IncrementalScorer>(scorer: &mut S, n_sources: usize, cfg: &SearchConfig) -> Result<Vec<Hypothesis>> {
    check(cfg)?;
    let v = scorer.vocab_size();
    let eos = scorer.eos();
    let k = cfg.beam_size;
    let mut states: Vec<SentenceState> =
        (0..n_sources).map(|s| SentenceState { alive: vec![Beam { row: s, tokens: Vec::new(), log_prob: 0.0 }], finished: Vec::new(), done: false }).collect();
    if n_sources == 0 {
        return Ok(Vec::new());
    }
    if cfg.max_len == 0 {
        return Ok(states.into_iter().map(|_| Hypothesis { tokens: Vec::new(), log_prob: 0.0, score: 0.0, finished: false }).collect());
    }
    let mut lp = scorer.start()?;
    check_row_count(&lp, n_sources, v)?;
    let mut step = 1;
    loop {
        let mut parents = Vec::new();
        let mut next_tokens = Vec::new();
        for st in states.iter_mut().filter(|s| !s.done) {
            // (log_prob, beam index, token)
            let mut cands: Vec<(f64, usize, usize)> = Vec::with_capacity(st.alive.len() * v);
            for (bi, b) in st.alive.iter().enumerate() {
                let row = &lp[b.row * v..][..v];
                for (tok, &l) in row.iter().enumerate() {
                    if l.is_finite() {
                        cands.push((b.log_prob + l, bi, tok));
                    }
                }
            }
            let alive = std::mem::take(&mut st.alive);
            cands.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| alive[x.1].tokens.cmp(&alive[y.1].tokens)).then_with(|| x.2.cmp(&y.2)));
            cands.truncate(2 * k);
            let mut new_alive = Vec::with_capacity(k);
            for (rank, &(score, bi, tok)) in cands.iter().enumerate() {
                if tok == eos {
                    if rank < k {
                        st.finish(alive[bi].tokens.clone(), score, true, cfg.length_penalty);
                    }
                } else if new_alive.len() < k {
                    let mut tokens = alive[bi].tokens.clone();
                    tokens.push(tok);
                    new_alive.push(Beam { row: alive[bi].row, tokens, log_prob: score });
                }
            }
            if st.finished.len() >= k || new_alive.is_empty() {
                st.done = true;
                continue;
            }
            if step == cfg.max_len {
                for b in new_alive {
                    st.finish(b.tokens, b.log_prob, false, cfg.length_penalty);
                }
                st.done = true;
                continue;
            }
            for b in &mut new_alive {
                parents.push(b.row);
                next_tokens.push(*b.tokens.last().expect("alive beams hold at least one token"));
                b.row = parents.len() - 1;
            }
            st.alive = new_alive;
        }
        if parents.is_empty() {
            break;
        }
        lp = scorer.advance(&parents, &next_tokens)?;
        check_row_count(&lp, parents.len(), v)?;
        step += 1;
    }
    states.into_iter().map(|st| st.finished.into_iter().min_by(hypothesis_order).ok_or_else(|| Error::invalid("search produced no hypothesis"))).collect()
}

/// Argmax decoding; ties go to the smaller token id.
pub fn greedy_search<S: IncrementalScorer>(scorer: &mut S, n_sources: usize, max_len: usize) -> Result<Vec<Hypothesis>> {
    let v = scorer.vocab_size();
    let eos = scorer.eos();
    let mut out: Vec<Hypothesis> = (0..n_sources).map(|_| Hypothesis { tokens: Vec::new(), log_prob: 0.0, score: 0.0, finished: false }).collect();
    if n_sources == 0 || max_len == 0 {
        return Ok(out);
    }
    let mut lp = scorer.start()?;
    let mut live: Vec<usize> = (0..n_sources).collect();
    for step in 1..=max_len {
        check_row_count(&lp, live.len(), v)?;
        let mut parents = Vec::new();
        let mut tokens = Vec::new();
        let mut still = Vec::new();
        for (row, &s) in live.iter().enumerate() {
            let r = &lp[row * v..][..v];
            let (tok, &l) = r
                .iter()
                .enumerate()
                .fold(None, |best: Option<(usize, &f64)>, (i, x)| match best {
                    Some((_, b)) if *b >= *x => best,
                    _ if x.is_finite() => Some((i, x)),
                    _ => best,
                })
                .ok_or_else(|| Error::invalid("scorer masked every token"))?;
            let h = &mut out[s];
            h.log_prob += l;
            if tok == eos {
                h.finished = true;
            } else {
                h.tokens.push(tok);
                if step < max_len {
                    parents.push(row);
                    tokens.push(tok);
                    still.push(s);
                }
            }
        }
        if parents.is_empty() {
            break;
        }
        live = still;
        lp = scorer.advance(&parents, &tokens)?;
    }
    for h in &mut out {
        h.score = normalized_score(h.log_prob, h.tokens.len() + usize::from(h.finished), 1.0);
    }
    Ok(out)
}
