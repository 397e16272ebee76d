use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use prunemt::corpus::*;
use prunemt::filter::*;
use prunemt::model::{ModelConfig, TranslationModel, Vocab};
use prunemt::numerics::SeededRng;
use prunemt::LangCode;

fn lang(s: &str) -> LangCode {
    s.parse().unwrap()
}

fn rec(s: &str, t: &str) -> ParallelRecord {
    ParallelRecord::new(lang("eng_Latn"), lang("swh_Latn"), s, t, "test")
}

fn rules_only() -> FilterConfig {
    FilterConfig { stages: StageToggles { rule_based: true, ..StageToggles::none() }, ..Default::default() }
}

fn noisy_corpus(seed: u64) -> SyntheticCorpus {
    let sizes = SplitSpec { train: 1000, dev: 100, devtest: 100, seed: 1 };
    generate_synthetic_corpus(&ToyLanguageSpec::default(), &sizes, &NoiseRates::uniform(0.1), seed).unwrap()
}

fn langid_for(c: &SyntheticCorpus) -> BTreeMap<LangCode, LangIdScorer> {
    train_langid(&seed_sentences(c, 200, 11).into_iter().collect()).unwrap()
}

fn embedder_for(c: &SyntheticCorpus) -> EmbeddingScorer<PivotEmbedder> {
    EmbeddingScorer::new(PivotEmbedder::train(&c.train, &lang("eng_Latn")).unwrap())
}

fn scorers_for(c: &SyntheticCorpus) -> Scorers {
    let qe = FnScorer::new("len-qe", None, |r: &ParallelRecord| (r.src.len().min(r.tgt.len()) as f64 / 40.0).min(1.0));
    Scorers { semantic: Some(Arc::new(embedder_for(c))), quality: Some(Arc::new(qe)), ..Default::default() }.with_langid(langid_for(c))
}

#[test]
fn rule_examples() {
    let (kept, rep) = rule_based_filter(&[rec("hi", "habari yako")], &FilterConfig::default()).unwrap();
    assert!(kept.is_empty());
    assert_eq!(rep.dropped[&DropReason::MinLength], 1);

    let (kept, rep) = rule_based_filter(&[rec(&"a".repeat(30), &"b".repeat(90))], &FilterConfig::default()).unwrap();
    assert!(kept.is_empty());
    assert_eq!(rep.dropped[&DropReason::LengthRatio], 1);

    let clean = rec("twenty characters ok", "ishirini herufi sawa");
    let (kept, rep) = rule_based_filter(std::slice::from_ref(&clean), &FilterConfig::default()).unwrap();
    assert_eq!(kept, vec![clean]);
    assert_eq!(rep.modified, 0);
}

#[test]
fn rule_boundaries_are_inclusive() {
    let cfg = FilterConfig::default();
    let ok = [rec("abc", "abc"), rec(&"x".repeat(200), &"y".repeat(200)), rec(&"a".repeat(10), &"b".repeat(20))];
    assert_eq!(rule_based_filter(&ok, &cfg).unwrap().0.len(), 3);
    let (_, rep) = rule_based_filter(&[rec(&"x".repeat(201), &"y".repeat(150)), rec(&"a".repeat(10), &"b".repeat(21))], &cfg).unwrap();
    assert_eq!(rep.dropped[&DropReason::MaxLength], 1);
    assert_eq!(rep.dropped[&DropReason::LengthRatio], 1);
}

#[test]
fn lengths_count_characters_not_bytes() {
    // three characters, six bytes
    let (kept, _) = rule_based_filter(&[rec("ñéü", "abc")], &FilterConfig::default()).unwrap();
    assert_eq!(kept.len(), 1);
}

#[test]
fn html_is_stripped_then_rules_rerun() {
    let recs = [rec("one <b>two</b> three", "moja mbili tatu <br/>"), rec("<p></p>", "tupu kabisa"), rec("one two three", "moja mbili tatu")];
    let (kept, rep) = rule_based_filter(&recs, &FilterConfig::default()).unwrap();
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].src, "one two three");
    assert_eq!(kept[0].tgt, "moja mbili tatu");
    assert_eq!(rep.modified, 2);
    assert_eq!(rep.dropped[&DropReason::Empty], 1);
    assert_eq!(rep.dropped[&DropReason::Duplicate], 1, "stripped copy of a later clean record is a duplicate of it");
    assert_eq!(strip_html("no tags"), None);
}

#[test]
fn dedup_keeps_first_and_order() {
    let recs = [rec("aaa", "bbb"), rec("ccc", "ddd"), rec("aaa ", "bbb"), rec("eee", "fff")];
    let (kept, rep) = rule_based_filter(&recs, &FilterConfig::default()).unwrap();
    assert_eq!(kept.iter().map(|r| r.src.as_str()).collect::<Vec<_>>(), ["aaa", "ccc", "eee"]);
    assert_eq!(rep.samples[0].index, 2);
}

#[test]
fn invalid_configs_rejected() {
    for cfg in [
        FilterConfig { min_chars: 0, ..Default::default() },
        FilterConfig { min_chars: 10, max_chars: 5, ..Default::default() },
        FilterConfig { max_length_ratio: 1.0, ..Default::default() },
        FilterConfig { threshold: 1.5, ..Default::default() },
        FilterConfig { stage_thresholds: [(Stage::Semantic, -0.1)].into(), ..Default::default() },
    ] {
        assert!(cfg.validate().is_err(), "{cfg:?}");
    }
}

#[test]
fn config_json_round_trip() {
    let cfg = FilterConfig {
        stage_thresholds: [(Stage::QualityEstimation, 0.7)].into(),
        skip_languages: [(Stage::Semantic, BTreeSet::from([lang("hau_Latn")]))].into(),
        ..Default::default()
    };
    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<FilterConfig>(&json).unwrap(), cfg);
    assert_ne!(cfg.fingerprint(), FilterConfig::default().fingerprint());
}

#[test]
fn langid_posterior_contract() {
    let c = noisy_corpus(1);
    let scorers = langid_for(&c);
    let model = scorers.values().next().unwrap().model().clone();
    let k = model.languages().len() as f64;
    for text in ["sifuri moja", "one two", "", "zzz"] {
        let p = model.posterior(text);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        if text.is_empty() {
            assert!(p.iter().all(|x| (x - 1.0 / k).abs() < 1e-12));
        }
    }
    let seed = seed_sentences(&c, 200, 11);
    let (mut right, mut total) = (0, 0);
    for (l, sents) in &seed {
        for s in sents {
            total += 1;
            right += (model.predict(s) == l) as usize;
        }
    }
    assert!(right as f64 >= 0.99 * total as f64, "{right}/{total}");
}

#[test]
fn langid_needs_seed_data() {
    let few: BTreeMap<LangCode, Vec<&str>> = [(lang("eng_Latn"), vec!["one two"; 49])].into();
    assert!(train_langid(&few).is_err());
    assert!(train_langid::<&str>(&BTreeMap::new()).is_err());
}

#[test]
fn langid_drops_wrong_language_injections() {
    let c = noisy_corpus(2);
    let scorers = Scorers::default().with_langid(langid_for(&c)).language.unwrap();
    let (after_rules, _) = rule_based_filter(&c.train, &FilterConfig::default()).unwrap();
    let (kept, rep) = language_detection_filter(&after_rules, &scorers, &FilterConfig::default()).unwrap();
    let injected = after_rules.iter().filter(|r| r.is_flagged(NoiseFlag::WrongLang)).count();
    let survived = kept.iter().filter(|r| r.is_flagged(NoiseFlag::WrongLang)).count();
    assert!(injected > 50);
    assert!(survived as f64 <= 0.1 * injected as f64, "{survived}/{injected} survived");
    let clean_lost = after_rules.iter().filter(|r| r.flags.is_empty()).count() - kept.iter().filter(|r| r.flags.is_empty()).count();
    assert!(clean_lost as f64 <= 0.01 * after_rules.len() as f64, "{clean_lost} clean records lost");
    rep.check().unwrap();
}

#[test]
fn langid_skip_list_and_missing_scorer() {
    let c = noisy_corpus(3);
    let scorers = Scorers::default().with_langid(langid_for(&c)).language.unwrap();
    // source text is hausa-like, labelled swahili
    let hau = c.ciphers[&lang("hau_Latn")].encode(&[1, 2, 3]);
    let bad = ParallelRecord::new(lang("swh_Latn"), lang("eng_Latn"), &hau, "one two three", "t");
    let cfg = FilterConfig::default();
    assert!(language_detection_filter(std::slice::from_ref(&bad), &scorers, &cfg).unwrap().0.is_empty());
    let skip = FilterConfig { skip_languages: [(Stage::LanguageDetection, BTreeSet::from([lang("swh_Latn")]))].into(), ..cfg.clone() };
    let (kept, rep) = language_detection_filter(std::slice::from_ref(&bad), &scorers, &skip).unwrap();
    assert_eq!(kept.len(), 1);
    assert_eq!(rep.bypassed, 0, "the English side was still checked");

    let unknown = ParallelRecord::new(lang("yor_Latn"), lang("eng_Latn"), "ookan", "one", "t");
    assert!(language_detection_filter(std::slice::from_ref(&unknown), &scorers, &cfg).is_err());
    let skip = FilterConfig { skip_languages: [(Stage::LanguageDetection, BTreeSet::from([lang("yor_Latn")]))].into(), ..cfg };
    assert_eq!(language_detection_filter(&[unknown], &scorers, &skip).unwrap().0.len(), 1);
}

struct Fixed(Vec<(String, Vec<f64>)>);

impl Embedder for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }
    fn supports(&self, l: &LangCode) -> bool {
        l.as_str() != "lin_Latn"
    }
    fn embed(&self, text: &str, _: &LangCode) -> prunemt::Result<Vec<f64>> {
        Ok(self.0.iter().find(|(t, _)| t == text).map(|(_, v)| v.clone()).unwrap_or(vec![0.0, 0.0]))
    }
}

#[test]
fn cosine_mapping() {
    let e = EmbeddingScorer::new(Fixed(vec![("xxx".into(), vec![1.0, 0.0]), ("yyy".into(), vec![2.0, 0.0]), ("zzz".into(), vec![0.0, 3.0])]));
    assert!((e.score(&rec("xxx", "yyy")).unwrap() - 1.0).abs() < 1e-12);
    assert!((e.score(&rec("xxx", "zzz")).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(e.score(&rec("xxx", "unknown")).unwrap(), 0.0);
    assert_eq!(e.warnings(), 1);

    let recs = [rec("xxx", "yyy"), rec("xxx", "zzz"), rec("qqq", "qqq")];
    let (kept, rep) = semantic_filter(&recs, &e, &FilterConfig::default()).unwrap();
    assert_eq!(kept, vec![recs[0].clone()]);
    assert_eq!(rep.warnings, 1);
    let lingala = ParallelRecord::new(lang("lin_Latn"), lang("eng_Latn"), "qqq", "zzz", "t");
    let (kept, rep) = semantic_filter(&[lingala], &e, &FilterConfig::default()).unwrap();
    assert_eq!((kept.len(), rep.bypassed), (1, 1));
}

#[test]
fn pivot_embedder_separates_aligned_from_shuffled() {
    let c = noisy_corpus(4);
    let e = embedder_for(&c);
    let aligned = &c.dev;
    let n = aligned.len();
    let shuffled: Vec<_> = (0..n)
        .map(|i| {
            let mut r = aligned[i].clone();
            // a partner from the same direction, several positions away
            let j = (i + 7..i + n).map(|j| j % n).find(|&j| aligned[j].direction() == r.direction() && aligned[j].tgt != r.tgt).unwrap();
            r.tgt = aligned[j].tgt.clone();
            r
        })
        .collect();
    let t = FilterConfig::default().threshold;
    let kept = aligned.iter().filter(|r| e.score(r).unwrap() >= t).count();
    let dropped = shuffled.iter().filter(|r| e.score(r).unwrap() < t).count();
    eprintln!("aligned kept {kept}/{n}, shuffled dropped {dropped}/{n}");
    assert!(kept as f64 >= 0.8 * n as f64);
    assert!(dropped as f64 >= 0.8 * n as f64);
}

#[test]
fn external_scorer_protocol() {
    let s = ExternalScorer::spawn("const", "sh", &["-c".into(), "while read line; do echo 0.75; done".into()], None).unwrap();
    for _ in 0..3 {
        assert_eq!(s.score(&rec("aaa", "bbb")).unwrap(), 0.75);
    }
    let (kept, _) = semantic_filter(&[rec("aaa", "bbb"), rec("ccc", "ddd")], &s, &FilterConfig::default()).unwrap();
    assert_eq!(kept.len(), 2);

    let bad = ExternalScorer::spawn("bad", "sh", &["-c".into(), "while read line; do echo 1.5; done".into()], None).unwrap();
    assert!(matches!(bad.score(&rec("aaa", "bbb")), Err(prunemt::Error::Scorer { .. })));
    let mute = ExternalScorer::spawn("mute", "sh", &["-c".into(), "exit 0".into()], None).unwrap();
    assert!(mute.score(&rec("aaa", "bbb")).is_err());
    assert!(ExternalScorer::spawn("none", "/nonexistent/scorer", &[], None).is_err());
}

#[test]
fn out_of_range_scores_are_errors() {
    let s = FnScorer::new("nan", None, |_: &ParallelRecord| f64::NAN);
    assert!(quality_estimation_filter(&[rec("aaa", "bbb")], &s, &FilterConfig::default()).is_err());
}

#[test]
fn qe_on_a_model_respects_support_and_skip_list() {
    let langs = [lang("eng_Latn"), lang("swh_Latn")];
    let vocab = Vocab::build(&langs, ["abcdefgh "]);
    let cfg = ModelConfig { d_model: 8, n_heads: 2, ffn_dim: 12, n_encoder_layers: 1, n_decoder_layers: 1, max_positions: 64, ..ModelConfig::default() };
    let model = Arc::new(TranslationModel::<f64>::new(cfg, vocab, &SeededRng::new(1)).unwrap());
    let qe = TeacherQe::new(model);
    let s = qe.score(&rec("abc", "bad")).unwrap();
    assert!((0.0..=1.0).contains(&s));
    assert_eq!(qe.score(&rec("abc", "xyz")).unwrap(), 0.0, "out-of-vocabulary target");
    let hau = ParallelRecord::new(lang("hau_Latn"), lang("eng_Latn"), "abc", "abc", "t");
    assert!(quality_estimation_filter(std::slice::from_ref(&hau), &qe, &FilterConfig::default()).is_err());
    let skip = FilterConfig { skip_languages: [(Stage::QualityEstimation, BTreeSet::from([lang("hau_Latn")]))].into(), ..Default::default() };
    assert_eq!(quality_estimation_filter(&[hau], &qe, &skip).unwrap().0.len(), 1);
}

#[test]
fn disabled_pipeline_is_identity() {
    let c = noisy_corpus(5);
    let cfg = FilterConfig { stages: StageToggles::none(), ..Default::default() };
    let (kept, rep) = run_pipeline(&c.train, &cfg, &Scorers::default()).unwrap();
    assert_eq!(kept, c.train);
    assert!(rep.stages.iter().all(|s| s.total_dropped() == 0 && !s.enabled));
    assert!(run_pipeline(&c.train, &FilterConfig::default(), &Scorers::default()).is_err(), "enabled stages need scorers");
}

#[test]
fn stage_one_removes_rule_detectable_noise() {
    let c = noisy_corpus(6);
    let (kept, rep) = run_pipeline(&c.train, &rules_only(), &Scorers::default()).unwrap();
    rep.check().unwrap();
    for f in [NoiseFlag::Misaligned, NoiseFlag::Duplicate, NoiseFlag::TooShort, NoiseFlag::TooLong, NoiseFlag::Empty] {
        assert!(c.train.iter().any(|r| r.is_flagged(f)));
        assert!(kept.iter().all(|r| !r.is_flagged(f)), "{f:?} survived");
    }
    assert!(kept.iter().all(|r| !r.src.contains('<') && !r.tgt.contains('<')));
    // A clean record may only go as a text-identical copy of an earlier survivor
    // (the dedup key ignores languages, so a wrong-language injection can match
    // a genuine record of another direction).
    let kept_keys: HashSet<_> = kept.iter().map(|r| r.full_key()).collect();
    for (i, r) in c.train.iter().enumerate() {
        if r.flags.is_empty() && !kept_keys.contains(&r.full_key()) {
            assert!(kept.iter().any(|k| k.pair_key() == r.pair_key()), "clean record {i} dropped: {r:?}");
            assert!(c.train[..i].iter().any(|o| o.pair_key() == r.pair_key()));
        }
    }
}

#[test]
fn full_pipeline_is_idempotent_and_telescopes() {
    let c = noisy_corpus(7);
    let scorers = scorers_for(&c);
    let cfg = FilterConfig::default();
    let (once, rep) = run_pipeline(&c.train, &cfg, &scorers).unwrap();
    rep.check().unwrap();
    assert_eq!(rep.stages.len(), 4);
    assert_eq!(rep.input, c.train.len());
    let (twice, rep2) = run_pipeline(&once, &cfg, &scorers).unwrap();
    assert_eq!(once, twice);
    assert!(rep2.stages.iter().all(|s| s.total_dropped() == 0 && s.modified == 0));
    let (again, _) = run_pipeline(&c.train, &cfg, &scorers).unwrap();
    assert_eq!(once, again, "deterministic");
}

#[test]
fn output_is_an_ordered_sublist() {
    let c = noisy_corpus(8);
    let cfg = FilterConfig { stages: StageToggles { rule_based: false, ..Default::default() }, ..Default::default() };
    let (kept, _) = run_pipeline(&c.train, &cfg, &scorers_for(&c)).unwrap();
    let mut it = c.train.iter();
    for k in &kept {
        assert!(it.any(|r| r == k));
    }
}

#[test]
fn raising_the_threshold_shrinks_the_kept_set() {
    let c = noisy_corpus(9);
    let scorers = scorers_for(&c);
    let mut prev: Option<HashSet<(String, String)>> = None;
    for t in [0.0, 0.3, 0.5, 0.6, 0.7, 0.9, 0.99, 1.0] {
        let cfg = FilterConfig { threshold: t, ..Default::default() };
        let kept: HashSet<_> = run_pipeline(&c.train, &cfg, &scorers).unwrap().0.iter().map(|r| r.pair_key()).collect();
        if let Some(p) = &prev {
            assert!(kept.is_subset(p), "threshold {t}");
        }
        prev = Some(kept);
    }
}

#[test]
fn report_serializes() {
    let c = noisy_corpus(10);
    let (_, rep) = run_pipeline(&c.train, &rules_only(), &Scorers::default()).unwrap();
    let back: FilterReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
    assert_eq!(back, rep);
    assert!(rep.dropped(DropReason::Duplicate) > 0);
}
