use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{fit_tree, DecisionTree, TreeParams};
use super::{check_training_input, ScoreVector};
use crate::error::{Error, Result};
use crate::featurize::FeatureMatrix;
use crate::groundtruth::LabelVector;

pub const DEFAULT_N_EST_PER_FILE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_est_per_file: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means `floor(sqrt(d))`, at least 1.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_est_per_file: DEFAULT_N_EST_PER_FILE,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_est_per_file == 0 {
            return Err(Error::InvalidParameter(
                "n_est_per_file must be positive".into(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter(
                "min_samples_leaf must be positive".into(),
            ));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParameter("max_depth must be positive".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::InvalidParameter(
                "max_features must be positive".into(),
            ));
        }
        Ok(())
    }

    fn tree_params(&self, d: usize) -> TreeParams {
        let sqrt = (d as f64).sqrt().floor() as usize;
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features.unwrap_or(sqrt).clamp(1, d.max(1)),
        }
    }
}

/// A forest that grows by appending trees, one batch per positive file.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    params: ForestParams,
    n_features: Option<usize>,
    trees: Vec<DecisionTree>,
    files_fitted: u64,
}

impl RandomForestModel {
    pub fn new(params: ForestParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            n_features: None,
            trees: Vec::new(),
            files_fitted: 0,
        })
    }

    pub(crate) fn from_parts(
        params: ForestParams,
        n_features: Option<usize>,
        trees: Vec<DecisionTree>,
        files_fitted: u64,
    ) -> Self {
        Self {
            params,
            n_features,
            trees,
            files_fitted,
        }
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_features(&self) -> Option<usize> {
        self.n_features
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Number of files that contributed trees.
    pub fn files_fitted(&self) -> u64 {
        self.files_fitted
    }

    /// Appends `n_est_per_file` trees fitted on bootstrap samples of the
    /// file. A file without positives leaves the model untouched; returns
    /// whether trees were added.
    pub fn fit_file(&mut self, x: &FeatureMatrix, y: &LabelVector) -> Result<bool> {
        check_training_input(x, y, self.n_features)?;
        if !y.has_positive() {
            return Ok(false);
        }
        let n = x.rows();
        let d = x.cols();
        let tp = self.params.tree_params(d);
        let first = self.trees.len() as u64;
        let seed = self.params.seed;
        let labels = y.labels();
        let new_trees: Vec<DecisionTree> = (0..self.params.n_est_per_file as u64)
            .into_par_iter()
            .map(|k| {
                // Each tree owns a stream, so results do not depend on
                // scheduling.
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(first + k);
                let sample: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
                fit_tree(x, labels, sample, tp, &mut rng)
            })
            .collect();
        self.trees.extend(new_trees);
        self.n_features = Some(d);
        self.files_fitted += 1;
        Ok(true)
    }

    /// Mean class-1 leaf probability over all trees.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<ScoreVector> {
        if self.trees.is_empty() {
            return Err(Error::NotFitted("random forest has no trees".into()));
        }
        if Some(x.cols()) != self.n_features {
            return Err(Error::Dimension(format!(
                "feature matrix has {} columns, model expects {}",
                x.cols(),
                self.n_features.unwrap_or(0)
            )));
        }
        let k = self.trees.len() as f64;
        let scores: Vec<f64> = (0..x.rows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
                (sum / k).clamp(0.0, 1.0)
            })
            .collect();
        Ok(ScoreVector::new(scores))
    }
}
