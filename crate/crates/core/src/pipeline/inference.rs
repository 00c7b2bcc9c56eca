//! The timed inference path: read, n-gram, translate, featurize, predict.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use super::with_workers;
use crate::classify::{Classifier, ScoreVector};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::featurize::featurize_capture;
use crate::packet_io::read_capture;
use crate::translate::{ngram_capture, translate_ngrams};
use crate::vocab::Vocabulary;

/// Wall-clock seconds per step. `boundary_s` is the cost of handing features
/// to the classifier; both live in one process here, so it is always zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThroughputReport {
    pub workers: usize,
    pub files: usize,
    pub packets: usize,
    pub bytes: u64,
    pub read_s: f64,
    pub ngram_s: f64,
    pub translate_s: f64,
    pub featurize_s: f64,
    pub boundary_s: f64,
    pub predict_s: f64,
}

impl ThroughputReport {
    pub fn total_s(&self) -> f64 {
        self.serial_s() + self.parallel_s()
    }

    /// Steps that run on the worker pool.
    pub fn parallel_s(&self) -> f64 {
        self.ngram_s + self.translate_s + self.featurize_s + self.predict_s
    }

    pub fn serial_s(&self) -> f64 {
        self.read_s + self.boundary_s
    }

    /// Decimal megabytes of capture file per second.
    pub fn rate_mb_s(&self) -> f64 {
        let t = self.total_s();
        if t > 0.0 {
            self.bytes as f64 / 1e6 / t
        } else {
            0.0
        }
    }

    pub fn accumulate(&mut self, other: &ThroughputReport) {
        self.files += other.files;
        self.packets += other.packets;
        self.bytes += other.bytes;
        self.read_s += other.read_s;
        self.ngram_s += other.ngram_s;
        self.translate_s += other.translate_s;
        self.featurize_s += other.featurize_s;
        self.boundary_s += other.boundary_s;
        self.predict_s += other.predict_s;
    }

    /// Single-line `key=value` record.
    pub fn to_record(&self) -> String {
        format!(
            "workers={},files={},packets={},bytes={},read_s={:.6},ngram_s={:.6},translate_s={:.6},\
             featurize_s={:.6},boundary_s={:.6},predict_s={:.6},parallel_s={:.6},serial_s={:.6},\
             total_s={:.6},rate_mb_s={:.6}",
            self.workers,
            self.files,
            self.packets,
            self.bytes,
            self.read_s,
            self.ngram_s,
            self.translate_s,
            self.featurize_s,
            self.boundary_s,
            self.predict_s,
            self.parallel_s(),
            self.serial_s(),
            self.total_s(),
            self.rate_mb_s()
        )
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let rows = [
            ("read", self.read_s),
            ("ngram", self.ngram_s),
            ("translate", self.translate_s),
            ("featurize", self.featurize_s),
            ("boundary", self.boundary_s),
            ("predict", self.predict_s),
        ];
        writeln!(s, "{:<12}{:>12}", "step", "seconds").unwrap();
        for (name, t) in rows {
            writeln!(s, "{name:<12}{t:>12.4}").unwrap();
        }
        writeln!(s, "{:<12}{:>12.4}", "total", self.total_s()).unwrap();
        writeln!(
            s,
            "{} files, {} packets, {} bytes, {:.2} MB/s with {} workers (boundary has no cost in-process)",
            self.files,
            self.packets,
            self.bytes,
            self.rate_mb_s(),
            self.workers
        )
        .unwrap();
        s
    }
}

/// Confirms the dictionary, embeddings and model describe the same shapes.
pub fn check_artifacts(
    vocab: &Vocabulary,
    embeddings: &EmbeddingMatrix,
    model: &Classifier,
) -> Result<()> {
    if embeddings.vocab_rows() != vocab.embedding_rows() {
        return Err(Error::Consistency(format!(
            "embeddings have {} rows, dictionary of {} n-grams needs {}",
            embeddings.vocab_rows(),
            vocab.len(),
            vocab.embedding_rows()
        )));
    }
    match model.n_features() {
        None => Err(Error::NotFitted("model has not been trained".into())),
        Some(d) if d != embeddings.dim() => Err(Error::Consistency(format!(
            "embeddings are {}-dimensional, model expects {d} features",
            embeddings.dim()
        ))),
        Some(_) => Ok(()),
    }
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed().as_secs_f64();
    out
}

/// Scores every packet of `capture`. Scores do not depend on `workers`.
pub fn run_inference(
    vocab: &Vocabulary,
    embeddings: &EmbeddingMatrix,
    model: &Classifier,
    capture: &Path,
    workers: usize,
) -> Result<(ScoreVector, ThroughputReport)> {
    check_artifacts(vocab, embeddings, model)?;
    let mut r = ThroughputReport {
        workers,
        files: 1,
        ..Default::default()
    };
    let scores = with_workers(workers, || -> Result<ScoreVector> {
        let cap = timed(&mut r.read_s, || read_capture(capture))?;
        r.packets = cap.len();
        r.bytes = cap.byte_size;
        let grams = timed(&mut r.ngram_s, || ngram_capture(&cap, vocab.n()));
        let source = cap.path.clone();
        drop(cap);
        let tokens = timed(&mut r.translate_s, || {
            translate_ngrams(source, &grams, vocab)
        });
        drop(grams);
        let x = timed(&mut r.featurize_s, || {
            featurize_capture(&tokens, embeddings)
        })?;
        timed(&mut r.predict_s, || model.predict(&x))
    })??;
    Ok((scores, r))
}
