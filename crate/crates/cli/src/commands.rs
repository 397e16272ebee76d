use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use prunemt::bench::{bench_throughput, emit_report, evaluate_direction, quality_efficiency_chart, EvalReport, ReportFormat, RunManifest, Throughput};
use prunemt::compress::{distill, prune, train, PruneConfig, PruneReport};
use prunemt::corpus::{generate_synthetic_corpus, read_corpus, seed_sentences, write_jsonl, CorpusFormat, ParallelRecord};
use prunemt::filter::{run_pipeline, train_langid, EmbeddingScorer, FilterConfig, FilterReport, PivotEmbedder, Scorers, TeacherQe};
use prunemt::model::{load_checkpoint, quantize_fp16, save_checkpoint, TranslationModel, Vocab};
use prunemt::numerics::SeededRng;
use prunemt::util::atomic_write;
use prunemt::{Error, LangCode, Model};
use serde_json::{json, Value};

use crate::config::{self, RunConfig};
use crate::{Command, Common};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn usage_msg(message: String) -> Self {
        CliError { code: EXIT_USAGE, kind: "usage".into(), message }
    }

    fn new(code: u8, e: Error) -> Self {
        CliError { code, kind: e.kind().into(), message: e.to_string() }
    }

    pub fn report(&self) {
        let rec = json!({"status": "error", "exit_code": self.code, "kind": self.kind, "message": self.message});
        eprintln!("{rec}");
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

trait Classify<T> {
    /// Failure caused by arguments or configuration.
    fn usage(self) -> CliResult<T>;
    /// Failure while doing the work.
    fn runtime(self) -> CliResult<T>;
}

impl<T> Classify<T> for prunemt::Result<T> {
    fn usage(self) -> CliResult<T> {
        self.map_err(|e| CliError::new(EXIT_USAGE, e))
    }
    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| CliError::new(EXIT_RUNTIME, e))
    }
}

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::usage_msg(msg.into()))
}

fn require_file(p: &Path) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        usage(format!("input file {} does not exist", p.display()))
    }
}

fn suffixed(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Shared per-run state: the resolved config and the manifest being built.
struct Run {
    cfg: RunConfig,
    manifest: RunManifest,
    manifest_path: PathBuf,
    started: Instant,
}

impl Run {
    fn start(command: &str, common: &Common, primary_out: &Path, inputs: &[&Path]) -> CliResult<Run> {
        let (cfg, file) = config::load(command, common.config.as_deref(), &common.overrides).usage()?;
        for p in inputs {
            require_file(p)?;
        }
        let snapshot = serde_json::to_value(&cfg).map_err(Error::from).runtime()?;
        let mut manifest = RunManifest::new(command, snapshot, cfg.seed);
        if let Some(f) = file {
            manifest.add_input(&f).runtime()?;
        }
        for p in inputs {
            manifest.add_input(p).runtime()?;
        }
        let manifest_path = common.manifest.clone().unwrap_or_else(|| suffixed(primary_out, ".manifest.json"));
        Ok(Run { cfg, manifest, manifest_path, started: Instant::now() })
    }

    fn phase<T>(&mut self, name: &str, f: impl FnOnce(&RunConfig) -> CliResult<T>) -> CliResult<T> {
        let t = Instant::now();
        let out = f(&self.cfg)?;
        self.manifest.time(name, t.elapsed().as_secs_f64());
        Ok(out)
    }

    fn finish(mut self, outputs: &[&Path]) -> CliResult<String> {
        for o in outputs {
            self.manifest.add_output(o).runtime()?;
        }
        self.manifest.time("total", self.started.elapsed().as_secs_f64());
        self.manifest.write(&self.manifest_path).runtime()?;
        let outs: Vec<String> = outputs.iter().map(|p| p.display().to_string()).collect();
        Ok(json!({
            "status": "ok",
            "command": self.manifest.command,
            "run_id": self.manifest.run_id,
            "outputs": outs,
            "manifest": self.manifest_path.display().to_string(),
        })
        .to_string())
    }
}

fn read_records(p: &Path) -> CliResult<Vec<ParallelRecord>> {
    let fmt = CorpusFormat::from_path(p).unwrap_or(CorpusFormat::Jsonl);
    Ok(read_corpus(p, fmt).runtime()?.0)
}

fn load_model(p: &Path) -> CliResult<Model> {
    Ok(load_checkpoint::<f32>(p).runtime()?.model)
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from).runtime()?;
    bytes.push(b'\n');
    atomic_write(path, &bytes).runtime()
}

fn read_seeds(p: &Path) -> CliResult<BTreeMap<LangCode, Vec<String>>> {
    let text = std::fs::read_to_string(p).map_err(Error::from).runtime()?;
    serde_json::from_str(&text).map_err(Error::from).runtime()
}

/// Checks that every enabled scored stage will have a scorer.
fn preflight_scorers(filter: &FilterConfig, seeds: Option<&Path>, qe_teacher: Option<&Path>) -> CliResult<()> {
    if filter.stages.language_detection && seeds.is_none() {
        return usage("language detection is enabled but no --langid-seeds file was given");
    }
    if filter.stages.quality_estimation && qe_teacher.is_none() {
        return usage("quality estimation is enabled but no teacher checkpoint is configured (scorers.qe_teacher)");
    }
    for p in seeds.into_iter().chain(qe_teacher) {
        require_file(p)?;
    }
    Ok(())
}

fn build_scorers(cfg: &RunConfig, records: &[ParallelRecord], seeds: Option<&Path>, qe_teacher: Option<&Path>) -> CliResult<Scorers> {
    let st = &cfg.filter.stages;
    let mut s = Scorers::default();
    if st.language_detection {
        let seeds = read_seeds(seeds.expect("checked by preflight"))?;
        s = s.with_langid(train_langid(&seeds).runtime()?);
    }
    if st.semantic {
        let emb = PivotEmbedder::train(records, &cfg.scorers.semantic_pivot).runtime()?;
        s.semantic = Some(Arc::new(EmbeddingScorer::new(emb)));
    }
    if st.quality_estimation {
        let teacher = load_model(qe_teacher.expect("checked by preflight"))?;
        s.quality = Some(Arc::new(TeacherQe::new(Arc::new(teacher))));
    }
    Ok(s)
}

pub fn run(cmd: Command) -> CliResult<String> {
    match cmd {
        Command::GenData { common, out_dir } => gen_data(&common, &out_dir),
        Command::Filter { common, input, out, report, langid_seeds } => filter(&common, &input, &out, report, langid_seeds.as_deref()),
        Command::Train { common, train, dev, out, init } => train_cmd(&common, &train, &dev, &out, init.as_deref()),
        Command::Distill { common, teacher, student, input, out, langid_seeds } => distill_cmd(&common, &teacher, student.as_deref(), &input, &out, langid_seeds.as_deref()),
        Command::Prune { common, model, dev, out, strategy, n, sides } => {
            let mut common = common;
            // named flags are shorthands for dotted overrides and win over --set
            if let Some(s) = strategy {
                common.overrides.push(format!("prune.strategy={s}"));
            }
            if let Some(n) = n {
                common.overrides.push(format!("prune.target_removals={n}"));
            }
            if let Some(s) = sides {
                common.overrides.push(format!("prune.sides={s}"));
            }
            prune_cmd(&common, &model, dev.as_deref(), &out)
        }
        Command::Quantize { common, model, out } => quantize(&common, &model, &out),
        Command::Evaluate { common, model, test, out, csv } => evaluate(&common, &model, &test, &out, csv.as_deref()),
        Command::Bench { common, model, test, out } => bench(&common, &model, &test, &out),
        Command::Report { common, input, out, format, chart } => report(&common, &input, &out, &format, chart.as_deref()),
    }
}

fn gen_data(common: &Common, dir: &Path) -> CliResult<String> {
    let manifest = dir.join("manifest.json");
    let common = Common { manifest: Some(common.manifest.clone().unwrap_or(manifest.clone())), ..common.clone() };
    let mut run = Run::start("gen-data", &common, &manifest, &[])?;
    let corpus = run.phase("generate", |c| generate_synthetic_corpus(&c.data.languages, &c.data.splits, &c.data.noise, c.seed).runtime())?;
    let n = run.cfg.data.langid_seed_sentences;
    let seeds: BTreeMap<LangCode, Vec<String>> = seed_sentences(&corpus, n, run.cfg.seed).into_iter().collect();
    let paths: Vec<PathBuf> = ["train.jsonl", "dev.jsonl", "devtest.jsonl", "langid_seeds.json"].iter().map(|f| dir.join(f)).collect();
    run.phase("write", |_| {
        write_jsonl(&corpus.train, &paths[0]).runtime()?;
        write_jsonl(&corpus.dev, &paths[1]).runtime()?;
        write_jsonl(&corpus.devtest, &paths[2]).runtime()?;
        write_json(&seeds, &paths[3])
    })?;
    run.finish(&paths.iter().map(PathBuf::as_path).collect::<Vec<_>>())
}

fn filter(common: &Common, input: &Path, out: &Path, report: Option<PathBuf>, seeds: Option<&Path>) -> CliResult<String> {
    let mut run = Run::start("filter", common, out, &[input])?;
    let qe = run.cfg.scorers.qe_teacher.clone();
    preflight_scorers(&run.cfg.filter, seeds, qe.as_deref())?;
    let records = read_records(input)?;
    let scorers = run.phase("scorers", |c| build_scorers(c, &records, seeds, qe.as_deref()))?;
    let (kept, rep) = run.phase("filter", |c| run_pipeline(&records, &c.filter, &scorers).runtime())?;
    let report = report.unwrap_or_else(|| suffixed(out, ".report.json"));
    write_jsonl(&kept, out).runtime()?;
    write_json(&rep, &report)?;
    run.finish(&[out, &report])
}

fn train_cmd(common: &Common, train_path: &Path, dev_path: &Path, out: &Path, init: Option<&Path>) -> CliResult<String> {
    let inputs: Vec<&Path> = [train_path, dev_path].into_iter().chain(init).collect();
    let mut run = Run::start("train", common, out, &inputs)?;
    let (tr, dev) = (read_records(train_path)?, read_records(dev_path)?);
    let start = match init {
        Some(p) => load_model(p)?,
        None => {
            let langs: std::collections::BTreeSet<LangCode> = tr.iter().chain(&dev).flat_map(|r| [r.src_lang.clone(), r.tgt_lang.clone()]).collect();
            let vocab = Vocab::build(&langs, tr.iter().chain(&dev).flat_map(|r| [r.src.as_str(), r.tgt.as_str()]));
            TranslationModel::new(run.cfg.model.clone(), vocab, &SeededRng::new(run.cfg.seed)).usage()?
        }
    };
    let (model, log) = run.phase("train", |c| train(&start, &tr, &dev, &c.train).runtime())?;
    let log_path = suffixed(out, ".log.json");
    let meta = BTreeMap::from([("stage".to_string(), json!("train")), ("best_dev_loss".to_string(), json!(log.best_dev_loss))]);
    save_checkpoint(&model, &meta, out).runtime()?;
    write_json(&log, &log_path)?;
    run.finish(&[out, &log_path])
}

fn distill_cmd(common: &Common, teacher: &Path, student: Option<&Path>, input: &Path, out: &Path, seeds: Option<&Path>) -> CliResult<String> {
    let inputs: Vec<&Path> = [teacher, input].into_iter().chain(student).collect();
    let mut run = Run::start("distill", common, out, &inputs)?;
    let qe = run.cfg.scorers.qe_teacher.clone().unwrap_or_else(|| teacher.to_path_buf());
    if run.cfg.distill.refilter {
        preflight_scorers(&run.cfg.filter, seeds, Some(&qe))?;
    }
    let t = load_model(teacher)?;
    let vocab = match student {
        Some(p) => load_model(p)?.vocab().clone(),
        None => t.vocab().clone(),
    };
    let authentic = read_records(input)?;
    let scorers = if run.cfg.distill.refilter { Some(run.phase("scorers", |c| build_scorers(c, &authentic, seeds, Some(&qe)))?) } else { None };
    let (all, rep) = run.phase("distill", |c| {
        let refilter = scorers.as_ref().map(|s| (&c.filter, s));
        distill(&t, &vocab, &authentic, &c.distill, refilter).runtime()
    })?;
    let report = suffixed(out, ".report.json");
    write_jsonl(&all, out).runtime()?;
    write_json(&rep, &report)?;
    run.finish(&[out, &report])
}

fn prune_cmd(common: &Common, model: &Path, dev: Option<&Path>, out: &Path) -> CliResult<String> {
    let inputs: Vec<&Path> = [model].into_iter().chain(dev).collect();
    let mut run = Run::start("prune", common, out, &inputs)?;
    let m = load_model(model)?;
    let mut pc: PruneConfig = run.cfg.prune.clone();
    let needs_dev = pc.strategy == prunemt::compress::PruneStrategy::Iterative && pc.target_removals > 0;
    let dev_records = match dev {
        Some(p) => read_records(p)?,
        None if needs_dev => return usage("iterative pruning needs --dev"),
        None => Vec::new(),
    };
    if needs_dev && pc.importance_directions.is_empty() {
        pc.importance_directions = PruneConfig::default_directions(&dev_records, &run.cfg.data.languages.base);
    }
    pc.validate(&m).usage()?;
    let (pruned, rep): (Model, PruneReport) = run.phase("prune", |_| prune(&m, &pc, &dev_records).runtime())?;
    let report = suffixed(out, ".report.json");
    let meta = BTreeMap::from([("stage".to_string(), json!("prune")), ("strategy".to_string(), serde_json::to_value(pc.strategy).unwrap_or(Value::Null))]);
    save_checkpoint(&pruned, &meta, out).runtime()?;
    write_json(&rep, &report)?;
    run.finish(&[out, &report])
}

fn quantize(common: &Common, model: &Path, out: &Path) -> CliResult<String> {
    let mut run = Run::start("quantize", common, out, &[model])?;
    let m = load_model(model)?;
    let q = run.phase("quantize", |_| quantize_fp16(&m).runtime())?;
    save_checkpoint(&q, &BTreeMap::from([("stage".to_string(), json!("fp16"))]), out).runtime()?;
    run.finish(&[out])
}

fn model_arg(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((label, path)) => (label.to_string(), PathBuf::from(path)),
        None => {
            let p = PathBuf::from(arg);
            let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| arg.to_string());
            (label, p)
        }
    }
}

fn evaluate(common: &Common, models: &[String], test: &Path, out: &Path, csv: Option<&Path>) -> CliResult<String> {
    let models: Vec<(String, PathBuf)> = models.iter().map(|m| model_arg(m)).collect();
    let inputs: Vec<&Path> = std::iter::once(test).chain(models.iter().map(|(_, p)| p.as_path())).collect();
    let mut run = Run::start("evaluate", common, out, &inputs)?;
    let records = read_records(test)?;
    let mut by_dir: BTreeMap<prunemt::Direction, Vec<ParallelRecord>> = BTreeMap::new();
    for r in records {
        by_dir.entry(r.direction()).or_default().push(r);
    }
    if by_dir.is_empty() {
        return Err(CliError::new(EXIT_RUNTIME, Error::InvalidArgument(format!("{} has no records", test.display()))));
    }
    let mut rows = Vec::new();
    for (label, path) in &models {
        let m = load_model(path)?;
        for recs in by_dir.values() {
            rows.push(run.phase("evaluate", |c| evaluate_direction(&m, label, recs, &c.decode, c.bench.warmup_batches).runtime())?);
        }
    }
    let report = EvalReport::new(rows);
    emit_report(&report, ReportFormat::Json, out).runtime()?;
    let mut outs = vec![out];
    if let Some(c) = csv {
        emit_report(&report, ReportFormat::Csv, c).runtime()?;
        outs.push(c);
    }
    run.finish(&outs)
}

fn bench(common: &Common, model: &Path, test: &Path, out: &Path) -> CliResult<String> {
    let mut run = Run::start("bench", common, out, &[model, test])?;
    let m = load_model(model)?;
    let records = read_records(test)?;
    let runs: Vec<Throughput> = run.phase("bench", |c| (0..c.bench.repetitions).map(|_| bench_throughput(&m, &records, &c.decode, c.bench.warmup_batches).runtime()).collect())?;
    let mut tps: Vec<f64> = runs.iter().map(|r| r.tokens_per_second).collect();
    tps.sort_by(f64::total_cmp);
    let summary = json!({
        "model": model.display().to_string(),
        "decode": run.cfg.decode,
        "warmup_batches": run.cfg.bench.warmup_batches,
        "runs": runs,
        "median_tokens_per_second": tps[tps.len() / 2],
    });
    write_json(&summary, out)?;
    run.finish(&[out])
}

enum AnyReport {
    Eval(EvalReport),
    Prune(PruneReport),
    Filter(FilterReport),
}

fn parse_report(v: Value) -> Option<AnyReport> {
    if let Ok(r) = serde_json::from_value::<EvalReport>(v.clone()) {
        return Some(AnyReport::Eval(r));
    }
    if let Ok(r) = serde_json::from_value::<PruneReport>(v.clone()) {
        return Some(AnyReport::Prune(r));
    }
    serde_json::from_value::<FilterReport>(v).ok().map(AnyReport::Filter)
}

fn report(common: &Common, input: &Path, out: &Path, format: &str, chart: Option<&str>) -> CliResult<String> {
    let format: ReportFormat = format.parse().usage()?;
    if chart.is_some_and(|c| c != "quality-efficiency") {
        return usage(format!("unknown chart `{}` (quality-efficiency)", chart.unwrap_or_default()));
    }
    let run = Run::start("report", common, out, &[input])?;
    let text = std::fs::read_to_string(input).map_err(Error::from).runtime()?;
    let value: Value = serde_json::from_str(&text).map_err(Error::from).runtime()?;
    let parsed =
        parse_report(value).ok_or_else(|| CliError::new(EXIT_RUNTIME, Error::InvalidArgument(format!("{} is not an evaluation, prune or filter report", input.display()))))?;
    match (parsed, chart) {
        (AnyReport::Eval(r), Some(_)) => emit_report(&quality_efficiency_chart(&r), format, out).runtime()?,
        (_, Some(_)) => return Err(CliError::new(EXIT_RUNTIME, Error::InvalidArgument("charts are built from evaluation reports".into()))),
        (AnyReport::Eval(r), None) => {
            r.check().runtime()?;
            emit_report(&r, format, out).runtime()?
        }
        (AnyReport::Prune(r), None) => emit_report(&r, format, out).runtime()?,
        (AnyReport::Filter(r), None) => emit_report(&r, format, out).runtime()?,
    }
    run.finish(&[out])
}
