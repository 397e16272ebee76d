use std::collections::HashSet;
use std::io::Write;

use prunemt::corpus::synthetic::BASE_WORDS;
use prunemt::corpus::*;
use prunemt::metrics::{chrf_pp, ChrfConfig};
use prunemt::model::vocab::nfc;
use prunemt::LangCode;
use serde::Deserialize;

fn lang(s: &str) -> LangCode {
    s.parse().unwrap()
}

fn write_tmp(content: &str, ext: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f
}

#[test]
fn empty_file_reads_as_nothing() {
    let f = write_tmp("", ".jsonl");
    let (recs, report) = read_corpus(f.path(), CorpusFormat::Jsonl).unwrap();
    assert!(recs.is_empty());
    assert!(report.malformed.is_empty());
}

#[test]
fn one_jsonl_line_is_one_record() {
    let f = write_tmp(r#"{"src_lang":"eng_Latn","tgt_lang":"swh_Latn","src":"one","tgt":"moja"}"#, ".jsonl");
    let (recs, _) = read_corpus(f.path(), CorpusFormat::Jsonl).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].tgt, "moja");
}

#[test]
fn malformed_lines_are_reported_then_fatal_above_ten_percent() {
    let good = r#"{"src_lang":"eng_Latn","tgt_lang":"swh_Latn","src":"a","tgt":"b"}"#;
    let mut lines: Vec<&str> = vec![good; 19];
    lines.push("{not json");
    let f = write_tmp(&lines.join("\n"), ".jsonl");
    let (recs, report) = read_corpus(f.path(), CorpusFormat::Jsonl).unwrap();
    assert_eq!(recs.len(), 19);
    assert_eq!(report.malformed.len(), 1);
    assert_eq!(report.malformed[0].line, 20);

    let bad = [good, good, good, r#"{"src_lang":"english","tgt_lang":"swh_Latn","src":"a","tgt":"b"}"#].join("\n");
    let f = write_tmp(&bad, ".jsonl");
    assert!(read_corpus(f.path(), CorpusFormat::Jsonl).is_err());
}

#[test]
fn missing_file_is_an_error() {
    assert!(read_corpus(std::path::Path::new("/nonexistent/x.jsonl"), CorpusFormat::Jsonl).is_err());
}

#[derive(Deserialize)]
struct Expected {
    src_lang: String,
    tgt_lang: String,
    src: String,
    tgt: String,
    origin: String,
}

#[test]
fn tsv_quoting_matches_python_fixture() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/quoted.tsv");
    let (recs, report) = read_corpus(&path, CorpusFormat::Tsv).unwrap();
    assert!(report.malformed.is_empty(), "{report:?}");
    let expected: Vec<Expected> = serde_json::from_str(include_str!("fixtures/quoted.expected.json")).unwrap();
    assert_eq!(recs.len(), expected.len());
    for (r, e) in recs.iter().zip(&expected) {
        assert_eq!(r.src_lang.as_str(), e.src_lang);
        assert_eq!(r.tgt_lang.as_str(), e.tgt_lang);
        assert_eq!(r.src, nfc(&e.src));
        assert_eq!(r.tgt, nfc(&e.tgt));
        assert_eq!(r.origin, e.origin);
    }
    assert_eq!(recs[0].src, "one\ttwo");
    assert_eq!(recs[3].src, "caf\u{e9}", "text is NFC-normalized on read");
}

#[test]
fn jsonl_round_trip() {
    let recs = vec![ParallelRecord::new(lang("eng_Latn"), lang("swh_Latn"), "a\tb\nc \"q\"", "x", "o")];
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.jsonl");
    write_jsonl(&recs, &p).unwrap();
    assert_eq!(read_corpus(&p, CorpusFormat::Jsonl).unwrap().0, recs);
}

fn rec(s: &str, t: &str) -> ParallelRecord {
    ParallelRecord::new(lang("eng_Latn"), lang("swh_Latn"), s, t, "test")
}

#[test]
fn reversal_doubles_and_is_involutive_up_to_dedup() {
    assert!(reverse_directions(&[]).is_empty());
    let one = vec![rec("one", "moja")];
    let r = reverse_directions(&one);
    assert_eq!(r.len(), 2);
    assert_eq!(r[1].src_lang, lang("swh_Latn"));
    assert_eq!(r[1].src, "moja");
    let recs = vec![rec("a b", "c d"), rec("e", "f"), rec("g", "h")];
    let once: HashSet<_> = reverse_directions(&recs).into_iter().map(|r| r.full_key()).collect();
    let twice: HashSet<_> = dedup_exact(&reverse_directions(&reverse_directions(&recs))).into_iter().map(|r| r.full_key()).collect();
    assert_eq!(once, twice);
}

#[test]
fn downsample_contract() {
    let recs: Vec<_> = (0..1000).map(|i| rec(&format!("s{i}"), &format!("t{i}"))).collect();
    assert_eq!(downsample(&recs, 1000, 1), recs);
    let a = downsample(&recs, 200, 7);
    assert_eq!(a.len(), 200);
    assert_eq!(a, downsample(&recs, 200, 7));
    // input order preserved
    let pos: Vec<usize> = a.iter().map(|r| r.src[1..].parse().unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn downsample_inclusion_is_uniform() {
    let n = 50;
    let cap = 10;
    let recs: Vec<_> = (0..n).map(|i| rec(&format!("s{i}"), "t")).collect();
    let trials = 1000;
    let mut hits = vec![0usize; n];
    for seed in 0..trials {
        for r in downsample(&recs, cap, seed as u64) {
            hits[r.src[1..].parse::<usize>().unwrap()] += 1;
        }
    }
    let p = cap as f64 / n as f64;
    let mean = trials as f64 * p;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    for h in hits {
        assert!((h as f64 - mean).abs() <= 5.0 * sd, "{h} vs {mean} +- {sd}");
    }
}

#[test]
fn downsample_leaves_small_directions_alone() {
    let mut recs: Vec<_> = (0..30).map(|i| rec(&format!("s{i}"), "t")).collect();
    let rev: Vec<_> = (0..5).map(|i| rec(&format!("u{i}"), "t").reversed()).collect();
    recs.extend(rev.clone());
    let out = downsample(&recs, 10, 3);
    assert_eq!(out.len(), 15);
    assert_eq!(&out[10..], &rev[..]);
}

fn small_sizes() -> SplitSpec {
    SplitSpec { train: 500, dev: 50, devtest: 50, seed: 1 }
}

#[test]
fn clean_corpus_is_flag_free_and_cipher_invertible() {
    let spec = ToyLanguageSpec::default();
    let c = generate_synthetic_corpus(&spec, &small_sizes(), &NoiseRates::default(), 3).unwrap();
    assert_eq!(c.train.len(), 500 * 4);
    assert_eq!(c.dev.len(), 50 * 4);
    for r in c.train.iter().chain(&c.dev).chain(&c.devtest) {
        assert!(r.flags.is_empty());
        assert_eq!(c.oracle_translate(&r.src_lang, &r.src, &r.tgt_lang).as_deref(), Some(r.tgt.as_str()));
        assert_eq!(c.oracle_translate(&r.tgt_lang, &r.tgt, &r.src_lang).as_deref(), Some(r.src.as_str()));
    }
    check_disjoint(&[&c.train, &c.dev, &c.devtest]).unwrap();
    assert_eq!(c.ciphers[&lang("eng_Latn")].words, BASE_WORDS.map(String::from).to_vec());
}

#[test]
fn eval_sentences_never_reach_train_in_any_direction() {
    let spec = ToyLanguageSpec::default();
    let c = generate_synthetic_corpus(&spec, &small_sizes(), &NoiseRates::default(), 4).unwrap();
    let base = |r: &ParallelRecord| c.ciphers[&r.src_lang].decode(&r.src).unwrap();
    let eval: HashSet<_> = c.dev.iter().chain(&c.devtest).map(base).collect();
    assert!(c.train.iter().all(|r| !eval.contains(&base(r))));
}

#[test]
fn dev_is_solved_by_the_cipher() {
    let c = generate_synthetic_corpus(&ToyLanguageSpec::default(), &small_sizes(), &NoiseRates::default(), 5).unwrap();
    let hyps: Vec<String> = c.dev.iter().map(|r| c.oracle_translate(&r.src_lang, &r.src, &r.tgt_lang).unwrap()).collect();
    let refs: Vec<String> = c.dev.iter().map(|r| r.tgt.clone()).collect();
    assert_eq!(chrf_pp(&hyps, &refs, &ChrfConfig::default()).unwrap().value, 100.0);
}

#[test]
fn duplicate_rate_is_binomial() {
    let noise = NoiseRates { duplicate: 0.1, ..Default::default() };
    let spec = ToyLanguageSpec { languages: vec![lang("swh_Latn")], ..Default::default() };
    let sizes = SplitSpec { train: 500, dev: 10, devtest: 10, seed: 1 };
    let c = generate_synthetic_corpus(&spec, &sizes, &noise, 6).unwrap();
    let n = c.train.len() as f64;
    let k = c.train.iter().filter(|r| r.is_flagged(NoiseFlag::Duplicate)).count() as f64;
    let sd = (n * 0.1 * 0.9).sqrt();
    assert!((k - n * 0.1).abs() < 4.0 * sd, "{k} duplicates of {n}");
    // every duplicate copies an earlier clean record
    let mut seen = HashSet::new();
    for r in &c.train {
        if r.is_flagged(NoiseFlag::Duplicate) {
            assert!(seen.contains(&r.pair_key()));
        } else {
            seen.insert(r.pair_key());
        }
    }
}

#[test]
fn noise_classes_are_exclusive_and_rates_validated() {
    let c = generate_synthetic_corpus(&ToyLanguageSpec::default(), &small_sizes(), &NoiseRates::uniform(0.1), 7).unwrap();
    assert!(c.train.iter().all(|r| r.flags.len() <= 1));
    for f in NoiseFlag::ALL {
        assert!(c.train.iter().any(|r| r.is_flagged(f)), "{f:?} never injected");
    }
    assert!(c.dev.iter().chain(&c.devtest).all(|r| r.flags.is_empty()));
    for bad in [NoiseRates { html: 1.5, ..Default::default() }, NoiseRates { empty: -0.1, ..Default::default() }, NoiseRates::uniform(0.2)] {
        assert!(generate_synthetic_corpus(&ToyLanguageSpec::default(), &small_sizes(), &bad, 1).is_err());
    }
}

#[test]
fn generation_is_deterministic() {
    let a = generate_synthetic_corpus(&ToyLanguageSpec::default(), &small_sizes(), &NoiseRates::uniform(0.05), 8).unwrap();
    let b = generate_synthetic_corpus(&ToyLanguageSpec::default(), &small_sizes(), &NoiseRates::uniform(0.05), 8).unwrap();
    assert_eq!(a, b);
}

#[test]
fn manifest_accounts_for_stages() {
    let recs: Vec<_> = (0..10).map(|i| rec(&format!("s{i}"), "t")).collect();
    let m = CorpusManifest::from_stages(&recs, &recs[..8], &recs[..5], Some(5)).unwrap();
    let c = &m.directions["eng_Latn-swh_Latn"];
    assert_eq!((c.initial, c.processed, c.sampled), (10, 8, 5));
    assert!(CorpusManifest::from_stages(&recs[..2], &recs, &recs, None).is_err());
}
