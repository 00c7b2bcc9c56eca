//! `key = value` pipeline configuration and the on-disk artifact layout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::classify::{ClassifierKind, ForestParams};
use crate::embedding::EmbeddingHyperparams;
use crate::error::{Error, Result};
use crate::eval::DEFAULT_THRESHOLDS;
use crate::tokenize::{check_ngram_len, DEFAULT_NGRAM_LEN};
use crate::vocab::DEFAULT_VOCAB_SIZE;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub n: usize,
    pub vocab_size: usize,
    pub embedding: EmbeddingHyperparams,
    pub classifier: ClassifierKind,
    pub forest: ForestParams,
    pub workers: usize,
    pub seed: u64,
    pub thresholds: Vec<f64>,
    pub work_dir: PathBuf,
    pub dictionary_path: Option<PathBuf>,
    pub embeddings_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_NGRAM_LEN,
            vocab_size: DEFAULT_VOCAB_SIZE,
            embedding: EmbeddingHyperparams::default(),
            classifier: ClassifierKind::RandomForest,
            forest: ForestParams::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            seed: 0,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            work_dir: PathBuf::from("work"),
            dictionary_path: None,
            embeddings_path: None,
            model_path: None,
        }
    }
}

/// Every key accepted by [`PipelineConfig::set`], in file order.
pub const CONFIG_KEYS: &[&str] = &[
    "n",
    "vocab_size",
    "batch_size",
    "skip_window",
    "num_skips",
    "embedding_size",
    "num_negative",
    "num_steps",
    "learning_rate",
    "classifier",
    "n_est_per_file",
    "max_depth",
    "min_samples_leaf",
    "max_features",
    "workers",
    "seed",
    "thresholds",
    "work_dir",
    "dictionary_path",
    "embeddings_path",
    "model_path",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {value:?}")))
}

fn parse_optional(key: &str, value: &str, none_word: &str) -> Result<Option<usize>> {
    if value.eq_ignore_ascii_case(none_word) {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl PipelineConfig {
    /// Applies one `key = value` setting. The shared `seed` also seeds the
    /// embedding and forest RNGs.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "n" => self.n = parse(key, value)?,
            "vocab_size" => self.vocab_size = parse(key, value)?,
            "batch_size" => self.embedding.batch_size = parse(key, value)?,
            "skip_window" => self.embedding.skip_window = parse(key, value)?,
            "num_skips" => self.embedding.num_skips = parse(key, value)?,
            "embedding_size" => self.embedding.embedding_size = parse(key, value)?,
            "num_negative" => self.embedding.num_negative = parse(key, value)?,
            "num_steps" => self.embedding.num_steps = parse(key, value)?,
            "learning_rate" => self.embedding.learning_rate = parse(key, value)?,
            "classifier" => self.classifier = value.parse()?,
            "n_est_per_file" => self.forest.n_est_per_file = parse(key, value)?,
            "max_depth" => self.forest.max_depth = parse_optional(key, value, "none")?,
            "min_samples_leaf" => self.forest.min_samples_leaf = parse(key, value)?,
            "max_features" => self.forest.max_features = parse_optional(key, value, "sqrt")?,
            "workers" => self.workers = parse(key, value)?,
            "seed" => {
                self.seed = parse(key, value)?;
                self.embedding.seed = self.seed;
                self.forest.seed = self.seed;
            }
            "thresholds" => {
                self.thresholds = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "work_dir" => self.work_dir = value.into(),
            "dictionary_path" => self.dictionary_path = Some(value.into()),
            "embeddings_path" => self.embeddings_path = Some(value.into()),
            "model_path" => self.model_path = Some(value.into()),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown config key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies `key=value` overrides, e.g. from the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("override {o:?} is not key=value"))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Parses a config file body; blank lines and `#` comments are skipped.
    /// Relative paths stay relative to the process working directory.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                format: "config file",
                offset: i as u64 + 1,
                reason: format!("expected key = value, got {line:?}"),
            })?;
            cfg.set(k, v).map_err(|e| Error::Format {
                format: "config file",
                offset: i as u64 + 1,
                reason: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<usize>, none: &str| v.map_or(none.to_string(), |v| v.to_string());
        let e = &self.embedding;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("n", self.n.to_string());
        kv("vocab_size", self.vocab_size.to_string());
        kv("batch_size", e.batch_size.to_string());
        kv("skip_window", e.skip_window.to_string());
        kv("num_skips", e.num_skips.to_string());
        kv("embedding_size", e.embedding_size.to_string());
        kv("num_negative", e.num_negative.to_string());
        kv("num_steps", e.num_steps.to_string());
        kv("learning_rate", e.learning_rate.to_string());
        kv("classifier", self.classifier.to_string());
        kv("n_est_per_file", self.forest.n_est_per_file.to_string());
        kv("max_depth", opt(self.forest.max_depth, "none"));
        kv("min_samples_leaf", self.forest.min_samples_leaf.to_string());
        kv("max_features", opt(self.forest.max_features, "sqrt"));
        kv("workers", self.workers.to_string());
        kv("seed", self.seed.to_string());
        let t: Vec<String> = self.thresholds.iter().map(|t| t.to_string()).collect();
        kv("thresholds", t.join(","));
        kv("work_dir", self.work_dir.display().to_string());
        for (k, p) in [
            ("dictionary_path", &self.dictionary_path),
            ("embeddings_path", &self.embeddings_path),
            ("model_path", &self.model_path),
        ] {
            if let Some(p) = p {
                kv(k, p.display().to_string());
            }
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        check_ngram_len(self.n)?;
        if self.vocab_size == 0 {
            return Err(Error::InvalidParameter(
                "vocab_size must be positive".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        if self.thresholds.iter().any(|t| t.is_nan()) {
            return Err(Error::InvalidParameter("thresholds must be numbers".into()));
        }
        self.embedding.validate()?;
        self.forest.validate()
    }

    pub fn layout(&self) -> ArtifactLayout {
        ArtifactLayout {
            root: self.work_dir.clone(),
            dictionary: self.dictionary_path.clone(),
            embeddings: self.embeddings_path.clone(),
            model: self.model_path.clone(),
        }
    }
}

/// Where every intermediate artifact lives. Per-capture artifacts are keyed
/// by the capture's file stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactLayout {
    root: PathBuf,
    dictionary: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    model: Option<PathBuf>,
}

impl ArtifactLayout {
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dictionary(&self) -> PathBuf {
        self.dictionary
            .clone()
            .unwrap_or_else(|| self.root.join("dictionary.bin"))
    }

    pub fn embeddings(&self) -> PathBuf {
        self.embeddings
            .clone()
            .unwrap_or_else(|| self.root.join("embeddings.bin"))
    }

    pub fn model(&self, kind: ClassifierKind) -> PathBuf {
        self.model
            .clone()
            .unwrap_or_else(|| self.root.join(format!("model-{kind}.bin")))
    }

    pub fn flat_tokens(&self, stem: &str) -> PathBuf {
        self.root.join("tokens").join(format!("{stem}.flat"))
    }

    pub fn packet_tokens(&self, stem: &str) -> PathBuf {
        self.root.join("tokens").join(format!("{stem}.pkt"))
    }

    pub fn features(&self, stem: &str) -> PathBuf {
        self.root.join("features").join(format!("{stem}.feat"))
    }

    pub fn labels(&self, stem: &str) -> PathBuf {
        self.root.join("labels").join(format!("{stem}.labels"))
    }

    pub fn scores(&self, kind: ClassifierKind, stem: &str) -> PathBuf {
        self.root
            .join(format!("scores-{kind}"))
            .join(format!("{stem}.scores"))
    }

    pub fn eval_dir(&self, kind: ClassifierKind) -> PathBuf {
        self.root.join(format!("eval-{kind}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_overrides(&["num_steps=5000", "classifier=gnb", "max_depth=7", "seed=9"])
            .unwrap();
        cfg.model_path = Some("m.bin".into());
        let back = PipelineConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.embedding.seed, 9);
        assert_eq!(back.forest.max_depth, Some(7));
    }

    #[test]
    fn comments_and_errors() {
        let cfg = PipelineConfig::parse("# c\n\nn = 3  # trailing\nthresholds = 0.5, 1\n").unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.thresholds, vec![0.5, 1.0]);
        for bad in [
            "nope = 1",
            "n = x",
            "n",
            "workers = 0",
            "n = 9",
            "num_skips = 3",
        ] {
            assert!(PipelineConfig::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn every_key_is_settable() {
        let mut cfg = PipelineConfig::default();
        for k in CONFIG_KEYS {
            let v = match *k {
                "classifier" => "gnb",
                "max_depth" => "none",
                "max_features" => "sqrt",
                "learning_rate" | "thresholds" => "0.5",
                "work_dir" | "dictionary_path" | "embeddings_path" | "model_path" => "x",
                _ => "2",
            };
            cfg.set(k, v).unwrap();
        }
    }

    #[test]
    fn layout_paths() {
        let cfg = PipelineConfig {
            work_dir: "w".into(),
            ..Default::default()
        };
        let l = cfg.layout();
        assert_eq!(l.flat_tokens("a"), Path::new("w/tokens/a.flat"));
        assert_eq!(
            l.model(ClassifierKind::GaussianNb),
            Path::new("w/model-gnb.bin")
        );
    }
}
