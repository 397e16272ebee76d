use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::corpus::ParallelRecord;
use crate::error::{Error, Result};
use crate::lang::LangCode;

/// Scores a whole record in [0, 1]. Used by the semantic and QE stages.
pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;
    fn supports(&self, lang: &LangCode) -> bool;
    fn score(&self, record: &ParallelRecord) -> Result<f64>;
    /// Running count of soft failures, e.g. zero-vector embeddings.
    fn warnings(&self) -> usize {
        0
    }
}

/// Scores one side's text in [0, 1] for a fixed language. Used for language ID.
pub trait TextScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, text: &str) -> Result<f64>;
}

/// Maps text to a dense vector. Vectors from different languages share a space.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn supports(&self, lang: &LangCode) -> bool;
    fn embed(&self, text: &str, lang: &LangCode) -> Result<Vec<f64>>;
}

/// Rejects NaN and values outside [0, 1].
pub fn check_score(scorer: &str, score: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(Error::Scorer { scorer: scorer.to_string(), message: format!("score {score} outside [0, 1]") })
    }
}

/// Cosine similarity of source and target embeddings, mapped by (1+cos)/2.
/// A zero vector scores 0 and bumps the warning counter.
pub struct EmbeddingScorer<E> {
    pub embedder: E,
    name: String,
    zero_vectors: AtomicUsize,
}

impl<E: Embedder> EmbeddingScorer<E> {
    pub fn new(embedder: E) -> Self {
        let name = format!("cosine({})", embedder.name());
        EmbeddingScorer { embedder, name, zero_vectors: AtomicUsize::new(0) }
    }

    pub fn similarity(a: &[f64], b: &[f64]) -> Option<f64> {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        (na > 0.0 && nb > 0.0).then(|| ((1.0 + dot / (na * nb)) / 2.0).clamp(0.0, 1.0))
    }
}

impl<E: Embedder> Scorer for EmbeddingScorer<E> {
    fn name(&self) -> &str {
        &self.name
    }

    fn warnings(&self) -> usize {
        self.zero_vectors.load(Ordering::Relaxed)
    }

    fn supports(&self, lang: &LangCode) -> bool {
        self.embedder.supports(lang)
    }

    fn score(&self, r: &ParallelRecord) -> Result<f64> {
        let a = self.embedder.embed(&r.src, &r.src_lang)?;
        let b = self.embedder.embed(&r.tgt, &r.tgt_lang)?;
        if a.len() != b.len() {
            return Err(Error::Scorer { scorer: self.name.clone(), message: format!("embedding widths differ ({} vs {})", a.len(), b.len()) });
        }
        match Self::similarity(&a, &b) {
            Some(s) => check_score(&self.name, s),
            None => {
                self.zero_vectors.fetch_add(1, Ordering::Relaxed);
                Ok(0.0)
            }
        }
    }
}

/// Closure-backed scorer, handy for tests and fixed rules.
pub struct FnScorer<F> {
    name: String,
    languages: Option<Vec<LangCode>>,
    f: F,
}

impl<F: Fn(&ParallelRecord) -> f64 + Send + Sync> FnScorer<F> {
    /// `languages: None` supports every language.
    pub fn new(name: &str, languages: Option<Vec<LangCode>>, f: F) -> Self {
        FnScorer { name: name.to_string(), languages, f }
    }
}

impl<F: Fn(&ParallelRecord) -> f64 + Send + Sync> Scorer for FnScorer<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn supports(&self, lang: &LangCode) -> bool {
        self.languages.as_ref().is_none_or(|l| l.contains(lang))
    }

    fn score(&self, r: &ParallelRecord) -> Result<f64> {
        check_score(&self.name, (self.f)(r))
    }
}

struct Pipe {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

/// A long-lived child process. Each request is one JSON record on a line of
/// its stdin; it must answer with one decimal score per line, in order.
pub struct ExternalScorer {
    name: String,
    languages: Option<Vec<LangCode>>,
    pipe: Mutex<Pipe>,
}

impl ExternalScorer {
    pub fn spawn(name: &str, program: &str, args: &[String], languages: Option<Vec<LangCode>>) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Scorer { scorer: name.to_string(), message: format!("cannot start {program}: {e}") })?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalScorer { name: name.to_string(), languages, pipe: Mutex::new(Pipe { child, stdin, stdout }) })
    }

    fn fail(&self, message: String) -> Error {
        Error::Scorer { scorer: self.name.clone(), message }
    }
}

impl Scorer for ExternalScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn supports(&self, lang: &LangCode) -> bool {
        self.languages.as_ref().is_none_or(|l| l.contains(lang))
    }

    fn score(&self, r: &ParallelRecord) -> Result<f64> {
        let mut p = self.pipe.lock().map_err(|_| self.fail("scorer pipe poisoned".into()))?;
        let line = serde_json::to_string(r)?;
        writeln!(p.stdin, "{line}").and_then(|_| p.stdin.flush()).map_err(|e| self.fail(format!("write failed: {e}")))?;
        let mut reply = String::new();
        let n = p.stdout.read_line(&mut reply).map_err(|e| self.fail(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(self.fail("child closed its output before answering".into()));
        }
        let score: f64 = reply.trim().parse().map_err(|_| self.fail(format!("reply {:?} is not a number", reply.trim())))?;
        check_score(&self.name, score)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if let Ok(p) = self.pipe.get_mut() {
            let _ = p.stdin.flush();
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }
}
