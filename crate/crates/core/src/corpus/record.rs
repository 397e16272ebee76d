use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::lang::{Direction, LangCode};
use crate::model::vocab::nfc;

/// Ground-truth label of an injected defect. Generator output only; the
/// filter pipeline never reads it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFlag {
    Html,
    WrongLang,
    Misaligned,
    Duplicate,
    TooShort,
    TooLong,
    Empty,
}

impl NoiseFlag {
    pub const ALL: [NoiseFlag; 7] = [NoiseFlag::Html, NoiseFlag::WrongLang, NoiseFlag::Misaligned, NoiseFlag::Duplicate, NoiseFlag::TooShort, NoiseFlag::TooLong, NoiseFlag::Empty];
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParallelRecord {
    pub src_lang: LangCode,
    pub tgt_lang: LangCode,
    pub src: String,
    pub tgt: String,
    #[serde(default)]
    pub origin: String,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<NoiseFlag>,
}

impl ParallelRecord {
    /// Builds a record with NFC-normalized text and no flags.
    pub fn new(src_lang: LangCode, tgt_lang: LangCode, src: &str, tgt: &str, origin: &str) -> Self {
        ParallelRecord { src_lang, tgt_lang, src: nfc(src), tgt: nfc(tgt), origin: origin.to_string(), flags: BTreeSet::new() }
    }

    pub fn direction(&self) -> Direction {
        Direction::new(self.src_lang.clone(), self.tgt_lang.clone())
    }

    /// Source and target swapped, languages included.
    pub fn reversed(&self) -> Self {
        ParallelRecord {
            src_lang: self.tgt_lang.clone(),
            tgt_lang: self.src_lang.clone(),
            src: self.tgt.clone(),
            tgt: self.src.clone(),
            origin: self.origin.clone(),
            flags: self.flags.clone(),
        }
    }

    /// Dedup key: the (src, tgt) pair after NFC and trimming.
    pub fn pair_key(&self) -> (String, String) {
        (nfc(self.src.trim()), nfc(self.tgt.trim()))
    }

    /// Split-disjointness key: languages plus texts.
    pub fn full_key(&self) -> (LangCode, LangCode, String, String) {
        let (s, t) = self.pair_key();
        (self.src_lang.clone(), self.tgt_lang.clone(), s, t)
    }

    pub fn is_flagged(&self, f: NoiseFlag) -> bool {
        self.flags.contains(&f)
    }
}
