//! Synthetic multilingual corpus: number-word sentences in a base language
//! and word-substitution ciphers of it, with labelled noise on train.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ops::SplitSpec;
use super::record::{NoiseFlag, ParallelRecord};
use crate::error::{Error, Result};
use crate::lang::{Direction, LangCode};
use crate::numerics::SeededRng;

pub const BASE_WORDS: [&str; 10] = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];

const CONSONANTS: &[u8] = b"bdfgklmnprstvzhjwc";
const VOWELS: &[u8] = b"aeiou";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyLanguageSpec {
    pub base: LangCode,
    /// Pseudo-languages, each a cipher of the base language.
    pub languages: Vec<LangCode>,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for ToyLanguageSpec {
    fn default() -> Self {
        ToyLanguageSpec {
            base: LangCode::new("eng_Latn").expect("valid code"),
            languages: vec![LangCode::new("swh_Latn").expect("valid code"), LangCode::new("hau_Latn").expect("valid code")],
            min_words: 2,
            max_words: 4,
        }
    }
}

impl ToyLanguageSpec {
    /// Base to each pseudo-language and back.
    pub fn directions(&self) -> Vec<Direction> {
        self.languages.iter().flat_map(|l| [Direction::new(self.base.clone(), l.clone()), Direction::new(l.clone(), self.base.clone())]).collect()
    }

    pub fn all_languages(&self) -> Vec<LangCode> {
        let mut v = vec![self.base.clone()];
        v.extend(self.languages.iter().cloned());
        v
    }

    fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(Error::config("toy spec needs at least one pseudo-language"));
        }
        if self.languages.len() > 3 {
            return Err(Error::config("at most 3 pseudo-languages (consonant inventories are disjoint)"));
        }
        let mut all = self.all_languages();
        all.sort();
        all.dedup();
        if all.len() != self.languages.len() + 1 {
            return Err(Error::config("toy languages must be distinct from each other and from the base"));
        }
        if self.min_words == 0 || self.min_words > self.max_words || self.max_words > 8 {
            return Err(Error::config("need 1 <= min_words <= max_words <= 8"));
        }
        Ok(())
    }
}

/// Per-class injection rates on the train split. Each record receives at
/// most one class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseRates {
    pub html: f64,
    pub wrong_lang: f64,
    pub misaligned: f64,
    pub duplicate: f64,
    pub too_short: f64,
    pub too_long: f64,
    pub empty: f64,
}

impl NoiseRates {
    pub fn uniform(rate: f64) -> Self {
        NoiseRates { html: rate, wrong_lang: rate, misaligned: rate, duplicate: rate, too_short: rate, too_long: rate, empty: rate }
    }

    pub fn rate(&self, f: NoiseFlag) -> f64 {
        match f {
            NoiseFlag::Html => self.html,
            NoiseFlag::WrongLang => self.wrong_lang,
            NoiseFlag::Misaligned => self.misaligned,
            NoiseFlag::Duplicate => self.duplicate,
            NoiseFlag::TooShort => self.too_short,
            NoiseFlag::TooLong => self.too_long,
            NoiseFlag::Empty => self.empty,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for f in NoiseFlag::ALL {
            let r = self.rate(f);
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config(format!("noise rate for {f:?} is {r}, outside [0, 1]")));
            }
        }
        let total: f64 = NoiseFlag::ALL.iter().map(|&f| self.rate(f)).sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::config(format!("noise rates sum to {total}, above 1")));
        }
        Ok(())
    }
}

/// Word-level bijection between the base words and a language's words.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cipher {
    pub lang: LangCode,
    pub words: Vec<String>,
}

impl Cipher {
    pub fn encode(&self, ids: &[usize]) -> String {
        ids.iter().map(|&i| self.words[i].as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn decode(&self, text: &str) -> Option<Vec<usize>> {
        text.split_whitespace().map(|w| self.words.iter().position(|x| x == w)).collect()
    }
}

fn make_cipher(lang: &LangCode, index: usize, rng: &mut SeededRng) -> Cipher {
    let cons: Vec<u8> = (0..6).map(|k| CONSONANTS[(index * 6 + k) % CONSONANTS.len()]).collect();
    let vows: Vec<u8> = (0..3).map(|k| VOWELS[(index + k) % VOWELS.len()]).collect();
    let mut seen = HashSet::new();
    let mut words = Vec::with_capacity(BASE_WORDS.len());
    while words.len() < BASE_WORDS.len() {
        let len = 4 + rng.below(2);
        let w: String = (0..len).map(|p| if p % 2 == 0 { cons[rng.below(cons.len())] } else { vows[rng.below(vows.len())] } as char).collect();
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    Cipher { lang: lang.clone(), words }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub train: Vec<ParallelRecord>,
    pub dev: Vec<ParallelRecord>,
    pub devtest: Vec<ParallelRecord>,
    pub ciphers: BTreeMap<LangCode, Cipher>,
}

impl SyntheticCorpus {
    /// Exact translation through the generating ciphers; `None` if `text`
    /// is not a well-formed sentence of `src_lang`.
    pub fn oracle_translate(&self, src_lang: &LangCode, text: &str, tgt_lang: &LangCode) -> Option<String> {
        let ids = self.ciphers.get(src_lang)?.decode(text)?;
        Some(self.ciphers.get(tgt_lang)?.encode(&ids))
    }

    pub fn languages(&self) -> Vec<LangCode> {
        self.ciphers.keys().cloned().collect()
    }

    /// Every text of every split, for vocabulary building.
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.train.iter().chain(&self.dev).chain(&self.devtest).flat_map(|r| [r.src.as_str(), r.tgt.as_str()])
    }
}

fn sample_sentence(rng: &mut SeededRng, spec: &ToyLanguageSpec) -> Vec<usize> {
    let n = spec.min_words + rng.below(spec.max_words - spec.min_words + 1);
    (0..n).map(|_| rng.below(BASE_WORDS.len())).collect()
}

/// Builds train/dev/devtest; sizes are per direction. Dev and devtest are
/// clean, and no base sentence used in them appears in train.
pub fn generate_synthetic_corpus(spec: &ToyLanguageSpec, sizes: &SplitSpec, noise: &NoiseRates, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    noise.validate()?;
    let root = SeededRng::new(seed);
    let mut ciphers = BTreeMap::new();
    ciphers.insert(spec.base.clone(), Cipher { lang: spec.base.clone(), words: BASE_WORDS.iter().map(|s| s.to_string()).collect() });
    for (i, l) in spec.languages.iter().enumerate() {
        ciphers.insert(l.clone(), make_cipher(l, i, &mut root.split(&format!("cipher/{l}"))));
    }
    let space: usize = (spec.min_words..=spec.max_words).map(|n| BASE_WORDS.len().pow(n as u32)).sum();
    let directions = spec.directions();
    let needed_eval = (sizes.dev + sizes.devtest) * directions.len();
    if needed_eval + sizes.train > space / 2 {
        return Err(Error::config(format!("requested split sizes need more distinct sentences than the {space} available")));
    }

    let render = |d: &Direction, ids: &[usize], origin: &str| ParallelRecord::new(d.src.clone(), d.tgt.clone(), &ciphers[&d.src].encode(ids), &ciphers[&d.tgt].encode(ids), origin);

    let mut reserved: HashSet<Vec<usize>> = HashSet::new();
    let mut eval_rng = root.split("eval-sentences");
    let mut dev = Vec::new();
    let mut devtest = Vec::new();
    for d in &directions {
        for (split, n, out) in [("dev", sizes.dev, &mut dev), ("devtest", sizes.devtest, &mut devtest)] {
            let mut made = 0;
            while made < n {
                let s = sample_sentence(&mut eval_rng, spec);
                if reserved.insert(s.clone()) {
                    out.push(render(d, &s, &format!("synthetic:{split}")));
                    made += 1;
                }
            }
        }
    }

    let mut train = Vec::new();
    for d in &directions {
        let mut rng = root.split(&format!("train/{d}"));
        let mut used = HashSet::new();
        let mut clean_so_far: Vec<ParallelRecord> = Vec::new();
        for _ in 0..sizes.train {
            let ids = loop {
                let s = sample_sentence(&mut rng, spec);
                if !reserved.contains(&s) && used.insert(s.clone()) {
                    break s;
                }
            };
            let clean = render(d, &ids, "synthetic:train");
            let class = pick_class(noise, rng.uniform());
            let rec = match class {
                None => clean,
                Some(NoiseFlag::Duplicate) if clean_so_far.is_empty() => clean,
                Some(f) => inject(f, clean, &ids, d, spec, &ciphers, &clean_so_far, &mut rng),
            };
            if rec.flags.is_empty() {
                clean_so_far.push(rec.clone());
            }
            train.push(rec);
        }
    }
    Ok(SyntheticCorpus { train, dev, devtest, ciphers })
}

fn pick_class(noise: &NoiseRates, u: f64) -> Option<NoiseFlag> {
    let mut acc = 0.0;
    for f in NoiseFlag::ALL {
        acc += noise.rate(f);
        if u < acc {
            return Some(f);
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn inject(
    flag: NoiseFlag,
    mut rec: ParallelRecord,
    ids: &[usize],
    d: &Direction,
    spec: &ToyLanguageSpec,
    ciphers: &BTreeMap<LangCode, Cipher>,
    clean: &[ParallelRecord],
    rng: &mut SeededRng,
) -> ParallelRecord {
    let on_src = rng.bernoulli(0.5);
    match flag {
        NoiseFlag::Html => {
            const TAGS: [&str; 4] = ["b", "i", "span", "p"];
            let side = if on_src { &mut rec.src } else { &mut rec.tgt };
            let words: Vec<&str> = side.split(' ').collect();
            let k = rng.below(words.len());
            let tag = TAGS[rng.below(TAGS.len())];
            *side = if rng.bernoulli(0.5) {
                words.iter().enumerate().map(|(i, w)| if i == k { format!("<{tag}>{w}</{tag}>") } else { w.to_string() }).collect::<Vec<_>>().join(" ")
            } else {
                format!("{side} <br/>")
            };
        }
        NoiseFlag::WrongLang => {
            // replace the pseudo-language side with another language's rendering
            let (side_lang, side) = if d.src == spec.base { (&d.tgt, &mut rec.tgt) } else { (&d.src, &mut rec.src) };
            let others: Vec<&LangCode> = ciphers.keys().filter(|l| *l != side_lang).collect();
            let other = others[rng.below(others.len())];
            *side = ciphers[other].encode(ids);
        }
        NoiseFlag::Misaligned => {
            let src_len = rec.src.chars().count();
            if rng.bernoulli(0.5) {
                let words = &ciphers[&d.tgt].words;
                while rec.tgt.chars().count() <= 2 * src_len {
                    rec.tgt.push(' ');
                    rec.tgt.push_str(&words[rng.below(words.len())]);
                }
            } else {
                rec.tgt = rec.tgt.chars().take(3).collect();
            }
        }
        NoiseFlag::Duplicate => {
            let mut dup = clean[rng.below(clean.len())].clone();
            dup.flags.insert(NoiseFlag::Duplicate);
            return dup;
        }
        NoiseFlag::TooShort => {
            let n = 1 + rng.below(2);
            let side = if on_src { &mut rec.src } else { &mut rec.tgt };
            *side = side.chars().take(n).collect();
        }
        NoiseFlag::TooLong => {
            let mut long_ids = ids.to_vec();
            while ciphers[&d.src].encode(&long_ids).chars().count() <= 200 || ciphers[&d.tgt].encode(&long_ids).chars().count() <= 200 {
                long_ids.extend_from_slice(ids);
            }
            rec.src = ciphers[&d.src].encode(&long_ids);
            rec.tgt = ciphers[&d.tgt].encode(&long_ids);
        }
        NoiseFlag::Empty => {
            let side = if on_src { &mut rec.src } else { &mut rec.tgt };
            *side = if rng.bernoulli(0.5) { String::new() } else { "   ".to_string() };
        }
    }
    rec.flags.insert(flag);
    rec
}

/// Base-language seed sentences per language, for training language ID.
pub fn seed_sentences(corpus: &SyntheticCorpus, per_language: usize, seed: u64) -> HashMap<LangCode, Vec<String>> {
    let mut rng = SeededRng::new(seed).split("langid-seed");
    let spec_words = BASE_WORDS.len();
    corpus
        .ciphers
        .iter()
        .map(|(l, c)| {
            let v = (0..per_language)
                .map(|_| {
                    let n = 2 + rng.below(3);
                    let ids: Vec<usize> = (0..n).map(|_| rng.below(spec_words)).collect();
                    c.encode(&ids)
                })
                .collect();
            (l.clone(), v)
        })
        .collect()
}
