use std::collections::{BTreeMap, HashSet};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::record::ParallelRecord;
use crate::error::{Error, Result};
use crate::lang::Direction;
use crate::numerics::SeededRng;

/// The input followed by a mirrored copy of every record.
pub fn reverse_directions(records: &[ParallelRecord]) -> Vec<ParallelRecord> {
    let mut out = records.to_vec();
    out.extend(records.iter().map(ParallelRecord::reversed));
    out
}

/// Keeps the first record of each exact (src, tgt) pair.
pub fn dedup_exact(records: &[ParallelRecord]) -> Vec<ParallelRecord> {
    let mut seen = HashSet::new();
    records.iter().filter(|r| seen.insert(r.pair_key())).cloned().collect()
}

/// Per direction, keeps a uniform sample of `cap` records when the direction
/// has more than `cap`; survivors keep their input order.
pub fn downsample(records: &[ParallelRecord], per_direction_cap: usize, seed: u64) -> Vec<ParallelRecord> {
    let mut by_dir: BTreeMap<Direction, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_dir.entry(r.direction()).or_default().push(i);
    }
    let root = SeededRng::new(seed);
    let mut keep = vec![false; records.len()];
    for (dir, idx) in &by_dir {
        if idx.len() <= per_direction_cap {
            idx.iter().for_each(|&i| keep[i] = true);
        } else {
            let mut rng = root.split(&format!("downsample/{dir}"));
            for j in sample(&mut rng, idx.len(), per_direction_cap) {
                keep[idx[j]] = true;
            }
        }
    }
    records.iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r.clone()).collect()
}

pub fn count_by_direction(records: &[ParallelRecord]) -> BTreeMap<Direction, usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.direction()).or_insert(0) += 1;
    }
    m
}

/// Split sizes are per translation direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: usize,
    pub dev: usize,
    pub devtest: usize,
    pub seed: u64,
}

impl SplitSpec {
    /// Segment counts of the public benchmark's dev and devtest splits,
    /// kept for reference; desk-scale runs use the smaller defaults.
    pub const REFERENCE_DEV: usize = 997;
    pub const REFERENCE_DEVTEST: usize = 1012;
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 2000, dev: 200, devtest: 200, seed: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub initial: usize,
    pub processed: usize,
    pub sampled: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub directions: BTreeMap<String, StageCounts>,
    pub provenance: Vec<String>,
    pub sampling_cap: Option<usize>,
}

impl CorpusManifest {
    pub fn from_stages(initial: &[ParallelRecord], processed: &[ParallelRecord], sampled: &[ParallelRecord], sampling_cap: Option<usize>) -> Result<Self> {
        let mut directions: BTreeMap<String, StageCounts> = BTreeMap::new();
        for (d, n) in count_by_direction(initial) {
            directions.entry(d.to_string()).or_default().initial = n;
        }
        for (d, n) in count_by_direction(processed) {
            directions.entry(d.to_string()).or_default().processed = n;
        }
        for (d, n) in count_by_direction(sampled) {
            directions.entry(d.to_string()).or_default().sampled = n;
        }
        let mut provenance: Vec<String> = initial.iter().map(|r| r.origin.clone()).collect();
        provenance.sort();
        provenance.dedup();
        let m = CorpusManifest { directions, provenance, sampling_cap };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (d, c) in &self.directions {
            if c.processed > c.initial || c.sampled > c.processed {
                return Err(Error::invalid(format!("manifest counts for {d} are not monotone: {c:?}")));
            }
        }
        Ok(())
    }
}

/// Checks that no (languages, src, tgt) key occurs in two splits.
pub fn check_disjoint(splits: &[&[ParallelRecord]]) -> Result<()> {
    let mut seen: BTreeMap<_, usize> = BTreeMap::new();
    for (si, split) in splits.iter().enumerate() {
        for r in split.iter() {
            if let Some(&other) = seen.get(&r.full_key()) {
                if other != si {
                    return Err(Error::invalid(format!("record {:?} -> {:?} appears in splits {other} and {si}", r.src, r.tgt)));
                }
            }
            seen.insert(r.full_key(), si);
        }
    }
    Ok(())
}
