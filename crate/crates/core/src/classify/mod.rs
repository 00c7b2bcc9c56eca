//! Binary classifiers over per-packet feature matrices, trained one file at a
//! time.

mod exact_sum;
mod forest;
mod naive_bayes;
mod persist;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub use exact_sum::ExactSum;
pub use forest::{ForestParams, RandomForestModel, DEFAULT_N_EST_PER_FILE};
pub use naive_bayes::{ClassStats, GaussianNbModel, VAR_FLOOR_RATIO};
pub use persist::{load_model, model_from_bytes, model_to_bytes, save_model};

use crate::error::{Error, Result};
use crate::featurize::FeatureMatrix;
use crate::groundtruth::LabelVector;

/// Class-1 probabilities, one per packet.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Self {
        debug_assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
        Self { scores }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.scores
    }

    /// One score per line, shortest round-trip decimal form.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.scores.len() * 8);
        for s in &self.scores {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut scores = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::Format {
                format: "score file",
                offset: i as u64 + 1,
                reason: format!("not a number: {line:?}"),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Format {
                    format: "score file",
                    offset: i as u64 + 1,
                    reason: format!("score {v} outside [0, 1]"),
                });
            }
            scores.push(v);
        }
        Ok(Self { scores })
    }
}

pub(crate) fn check_training_input(
    x: &FeatureMatrix,
    y: &LabelVector,
    n_features: Option<usize>,
) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} has {} feature rows but {} has {} labels",
            x.source.display(),
            x.rows(),
            y.source.display(),
            y.len()
        )));
    }
    if x.cols() == 0 {
        return Err(Error::Dimension("feature matrix has zero columns".into()));
    }
    if let Some(d) = n_features {
        if x.cols() != d {
            return Err(Error::Dimension(format!(
                "{} has {} columns, model was trained on {d}",
                x.source.display(),
                x.cols()
            )));
        }
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{} contains non-finite features",
            x.source.display()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    RandomForest,
    GaussianNb,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::RandomForest => "rf",
            ClassifierKind::GaussianNb => "gnb",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" | "random_forest" | "randomforest" => Ok(ClassifierKind::RandomForest),
            "gnb" | "naive_bayes" | "gaussian_nb" => Ok(ClassifierKind::GaussianNb),
            other => Err(Error::InvalidParameter(format!(
                "unknown classifier {other:?}, expected rf or gnb"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    RandomForest(RandomForestModel),
    GaussianNb(GaussianNbModel),
}

impl Classifier {
    pub fn new(kind: ClassifierKind, forest: ForestParams) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::RandomForest => {
                Classifier::RandomForest(RandomForestModel::new(forest)?)
            }
            ClassifierKind::GaussianNb => Classifier::GaussianNb(GaussianNbModel::new()),
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::RandomForest(_) => ClassifierKind::RandomForest,
            Classifier::GaussianNb(_) => ClassifierKind::GaussianNb,
        }
    }

    pub fn n_features(&self) -> Option<usize> {
        match self {
            Classifier::RandomForest(m) => m.n_features(),
            Classifier::GaussianNb(m) => m.n_features(),
        }
    }

    /// Returns whether the file changed the model.
    pub fn fit_file(&mut self, x: &FeatureMatrix, y: &LabelVector) -> Result<bool> {
        match self {
            Classifier::RandomForest(m) => m.fit_file(x, y),
            Classifier::GaussianNb(m) => m.fit_file(x, y),
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<ScoreVector> {
        match self {
            Classifier::RandomForest(m) => m.predict(x),
            Classifier::GaussianNb(m) => m.predict(x),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_model(self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_model(path)
    }
}

pub fn rf_fit_file(
    model: &mut RandomForestModel,
    x: &FeatureMatrix,
    y: &LabelVector,
) -> Result<bool> {
    model.fit_file(x, y)
}

pub fn rf_predict(model: &RandomForestModel, x: &FeatureMatrix) -> Result<ScoreVector> {
    model.predict(x)
}

pub fn gnb_fit_file(
    model: &mut GaussianNbModel,
    x: &FeatureMatrix,
    y: &LabelVector,
) -> Result<bool> {
    model.fit_file(x, y)
}

pub fn gnb_predict(model: &GaussianNbModel, x: &FeatureMatrix) -> Result<ScoreVector> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "RF".parse::<ClassifierKind>().unwrap(),
            ClassifierKind::RandomForest
        );
        assert_eq!(
            "gnb".parse::<ClassifierKind>().unwrap(),
            ClassifierKind::GaussianNb
        );
        assert!("svm".parse::<ClassifierKind>().is_err());
        assert_eq!(ClassifierKind::GaussianNb.to_string(), "gnb");
    }

    #[test]
    fn score_text_round_trip() {
        let s = ScoreVector::new(vec![0.0, 1.0, 0.1, 1.0 / 3.0]);
        assert_eq!(ScoreVector::from_text(&s.to_text()).unwrap(), s);
        assert!(ScoreVector::from_text("1.5\n").is_err());
        assert!(ScoreVector::from_text("x\n").is_err());
    }
}
