//! End-to-end orchestration: training phases, the inference path, throughput
//! benchmarking and synthetic corpora.

pub mod bench;
pub mod config;
pub mod inference;
pub mod synth;
pub mod training;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use bench::{bench, theoretical_speedup, BenchReport, BenchRow};
pub use config::{ArtifactLayout, PipelineConfig};
pub use inference::{check_artifacts, run_inference, ThroughputReport};
pub use synth::{generate_synthetic_corpus, BytePattern, SynthCorpus, SynthSpec};
pub use training::{run_training, TrainingReport};

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `workers` threads, so every rayon call
/// inside it is bounded by that count.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::InvalidParameter("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Train/test selector over a capture list in its given order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    All,
    /// Positions 0, 2, 4, ...
    Even,
    /// Positions 1, 3, 5, ...
    Odd,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Split::All),
            "even" => Ok(Split::Even),
            "odd" => Ok(Split::Odd),
            other => Err(Error::InvalidParameter(format!(
                "unknown split {other:?}, expected all, even or odd"
            ))),
        }
    }
}

impl Split {
    pub fn select<T: Clone>(self, items: &[T]) -> Vec<T> {
        items
            .iter()
            .enumerate()
            .filter(|(i, _)| match self {
                Split::All => true,
                Split::Even => i % 2 == 0,
                Split::Odd => i % 2 == 1,
            })
            .map(|(_, x)| x.clone())
            .collect()
    }
}

pub fn capture_stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| {
            Error::InvalidParameter(format!("{} has no usable file name", path.display()))
        })
}

/// Stems in order; per-capture artifacts are keyed by stem, so two captures
/// with the same stem would overwrite each other.
pub fn capture_stems<P: AsRef<Path>>(captures: &[P]) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    captures
        .iter()
        .map(|p| {
            let stem = capture_stem(p.as_ref())?;
            if !seen.insert(stem.clone()) {
                return Err(Error::InvalidParameter(format!(
                    "two captures share the name {stem:?}"
                )));
            }
            Ok(stem)
        })
        .collect()
}

/// `*.pcap` files directly inside `dir`, sorted by name.
pub fn list_captures(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "pcap") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
