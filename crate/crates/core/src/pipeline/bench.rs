//! Inference throughput at several worker counts, with Amdahl projections.

use std::fmt::Write as _;
use std::path::Path;

use super::inference::{check_artifacts, run_inference, ThroughputReport};
use crate::classify::Classifier;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// Amdahl's law: `(P + S) / (P / t + S)`. Pass `f64::INFINITY` threads for
/// the limit `(P + S) / S`.
pub fn theoretical_speedup(parallel_s: f64, serial_s: f64, threads: f64) -> Result<f64> {
    if !(parallel_s >= 0.0 && serial_s >= 0.0) || !parallel_s.is_finite() || !serial_s.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "times must be finite and non-negative, got {parallel_s} and {serial_s}"
        )));
    }
    if threads.is_nan() || threads < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "threads must be >= 1, got {threads}"
        )));
    }
    if parallel_s + serial_s == 0.0 {
        return Err(Error::Undefined("speedup of a zero-length run".into()));
    }
    if threads.is_infinite() {
        return if serial_s == 0.0 {
            Ok(f64::INFINITY)
        } else {
            Ok((parallel_s + serial_s) / serial_s)
        };
    }
    Ok((parallel_s + serial_s) / (parallel_s / threads + serial_s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub threads: usize,
    pub report: ThroughputReport,
    /// Total-time speedup against the one-worker run.
    pub relative_speedup: f64,
    /// Speedup of the parallel steps alone.
    pub parallel_speedup: f64,
    /// Amdahl projection from the one-worker parallel/serial split.
    pub theoretical_speedup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub baseline: ThroughputReport,
    pub rows: Vec<BenchRow>,
    pub theoretical_limit: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        1.0
    }
}

fn run_all<P: AsRef<Path>>(
    vocab: &Vocabulary,
    emb: &EmbeddingMatrix,
    model: &Classifier,
    captures: &[P],
    threads: usize,
) -> Result<ThroughputReport> {
    let mut total = ThroughputReport {
        workers: threads,
        ..Default::default()
    };
    for p in captures {
        let (_, r) = run_inference(vocab, emb, model, p.as_ref(), threads)?;
        total.accumulate(&r);
    }
    Ok(total)
}

/// Runs inference over every capture at each thread count. A one-worker run
/// is always made and serves as the baseline.
pub fn bench<P: AsRef<Path>>(
    vocab: &Vocabulary,
    emb: &EmbeddingMatrix,
    model: &Classifier,
    captures: &[P],
    thread_counts: &[usize],
) -> Result<BenchReport> {
    if captures.is_empty() {
        return Err(Error::InvalidParameter(
            "bench needs at least one capture".into(),
        ));
    }
    check_artifacts(vocab, emb, model)?;
    let baseline = run_all(vocab, emb, model, captures, 1)?;
    let (p, s) = (baseline.parallel_s(), baseline.serial_s());
    let theoretical_limit = theoretical_speedup(p, s, f64::INFINITY).unwrap_or(1.0);
    let mut rows = Vec::with_capacity(thread_counts.len());
    for &t in thread_counts {
        let report = if t == 1 {
            baseline.clone()
        } else {
            run_all(vocab, emb, model, captures, t)?
        };
        rows.push(BenchRow {
            threads: t,
            relative_speedup: ratio(baseline.total_s(), report.total_s()),
            parallel_speedup: ratio(baseline.parallel_s(), report.parallel_s()),
            theoretical_speedup: theoretical_speedup(p, s, t as f64).unwrap_or(1.0),
            report,
        });
    }
    Ok(BenchReport {
        baseline,
        rows,
        theoretical_limit,
    })
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:>7} {:>10} {:>10} {:>10} {:>9} {:>9} {:>11}",
            "threads", "total_s", "parallel_s", "serial_s", "speedup", "par_gain", "theoretical"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:>7} {:>10.4} {:>10.4} {:>10.4} {:>9.3} {:>9.3} {:>11.3}",
                r.threads,
                r.report.total_s(),
                r.report.parallel_s(),
                r.report.serial_s(),
                r.relative_speedup,
                r.parallel_speedup,
                r.theoretical_speedup
            )
            .unwrap();
        }
        writeln!(
            s,
            "theoretical limit (infinite threads): {:.3}",
            self.theoretical_limit
        )
        .unwrap();
        s
    }
}
