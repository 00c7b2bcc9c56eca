use std::f64::consts::PI;

use rayon::prelude::*;

use super::exact_sum::ExactSum;
use super::{check_training_input, ScoreVector};
use crate::error::{Error, Result};
use crate::featurize::FeatureMatrix;
use crate::groundtruth::LabelVector;

/// Relative variance floor, scaled by the largest pooled feature variance.
pub const VAR_FLOOR_RATIO: f64 = 1e-9;

/// Streaming sufficient statistics for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub(crate) count: u64,
    pub(crate) sums: Vec<ExactSum>,
    /// Sum of squared deviations from the class mean, per feature.
    pub(crate) m2: Vec<f64>,
}

impl ClassStats {
    fn empty(d: usize) -> Self {
        Self {
            count: 0,
            sums: vec![ExactSum::default(); d],
            m2: vec![0.0; d],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self, j: usize) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sums[j].value() / self.count as f64
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.sums.len()).map(|j| self.mean(j)).collect()
    }

    /// Unfloored population variance.
    pub fn raw_var(&self, j: usize) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.m2[j] / self.count as f64
    }

    /// Chan et al. pairwise merge; sums stay exact so the merged mean does
    /// not depend on merge order.
    fn merge(&mut self, other: &ClassStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for j in 0..self.sums.len() {
            let delta = other.mean(j) - self.mean(j);
            self.m2[j] += other.m2[j] + delta * delta * na * nb / n;
            self.sums[j].merge(&other.sums[j]);
        }
        self.count += other.count;
    }

    fn from_rows(x: &FeatureMatrix, idx: &[usize]) -> Self {
        let mut s = Self::empty(x.cols());
        for r in idx.iter().map(|i| x.row(*i)) {
            for (acc, v) in s.sums.iter_mut().zip(r) {
                acc.add(*v);
            }
            s.count += 1;
        }
        if s.count == 0 {
            return s;
        }
        let means = s.means();
        for r in idx.iter().map(|i| x.row(*i)) {
            for ((m2, v), mean) in s.m2.iter_mut().zip(r).zip(&means) {
                let dev = f64::from(*v) - mean;
                *m2 += dev * dev;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNbModel {
    n_features: Option<usize>,
    classes: [ClassStats; 2],
}

impl Default for GaussianNbModel {
    fn default() -> Self {
        Self::new()
    }
}

impl GaussianNbModel {
    pub fn new() -> Self {
        Self {
            n_features: None,
            classes: [ClassStats::empty(0), ClassStats::empty(0)],
        }
    }

    pub(crate) fn from_parts(n_features: Option<usize>, classes: [ClassStats; 2]) -> Self {
        Self {
            n_features,
            classes,
        }
    }

    pub fn n_features(&self) -> Option<usize> {
        self.n_features
    }

    pub fn class(&self, c: usize) -> &ClassStats {
        &self.classes[c]
    }

    pub(crate) fn classes(&self) -> &[ClassStats; 2] {
        &self.classes
    }

    /// Merges the file's per-class statistics. Unlike the forest, files
    /// without positives still contribute benign statistics. Returns whether
    /// any row was added.
    pub fn fit_file(&mut self, x: &FeatureMatrix, y: &LabelVector) -> Result<bool> {
        check_training_input(x, y, self.n_features)?;
        if x.rows() == 0 {
            return Ok(false);
        }
        let d = x.cols();
        if self.n_features.is_none() {
            self.classes = [ClassStats::empty(d), ClassStats::empty(d)];
            self.n_features = Some(d);
        }
        let labels = y.labels();
        for (c, stats) in self.classes.iter_mut().enumerate() {
            let idx: Vec<usize> = (0..x.rows()).filter(|i| labels[*i] as usize == c).collect();
            stats.merge(&ClassStats::from_rows(x, &idx));
        }
        Ok(true)
    }

    /// `1e-9` times the largest feature variance over both classes pooled,
    /// with 1.0 standing in when every feature is constant.
    pub fn var_floor(&self) -> f64 {
        let mut pooled = self.classes[0].clone();
        pooled.merge(&self.classes[1]);
        let max = (0..pooled.m2.len())
            .map(|j| pooled.raw_var(j))
            .fold(0.0f64, f64::max);
        let scale = if max > 0.0 && max.is_finite() {
            max
        } else {
            1.0
        };
        VAR_FLOOR_RATIO * scale
    }

    /// Floored per-class variances.
    pub fn variances(&self, c: usize) -> Vec<f64> {
        let floor = self.var_floor();
        (0..self.classes[c].m2.len())
            .map(|j| self.classes[c].raw_var(j).max(floor))
            .collect()
    }

    pub fn priors(&self) -> [f64; 2] {
        let total = (self.classes[0].count + self.classes[1].count) as f64;
        [
            self.classes[0].count as f64 / total,
            self.classes[1].count as f64 / total,
        ]
    }

    /// Posterior `P(c = 1 | x)`.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<ScoreVector> {
        for (c, s) in self.classes.iter().enumerate() {
            if s.count == 0 {
                return Err(Error::NotFitted(format!(
                    "class {c} has no training samples"
                )));
            }
        }
        let d = self.n_features.unwrap_or(0);
        if x.cols() != d {
            return Err(Error::Dimension(format!(
                "feature matrix has {} columns, model expects {d}",
                x.cols()
            )));
        }
        let priors = self.priors();
        let params: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..2)
            .map(|c| {
                let var = self.variances(c);
                let norm =
                    priors[c].ln() - 0.5 * var.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>();
                (norm, self.classes[c].means(), var)
            })
            .collect();
        let jll = |row: &[f32], c: usize| {
            let (norm, mean, var) = &params[c];
            norm - 0.5
                * row
                    .iter()
                    .zip(mean)
                    .zip(var)
                    .map(|((x, m), v)| {
                        let dev = f64::from(*x) - m;
                        dev * dev / v
                    })
                    .sum::<f64>()
        };
        let scores = (0..x.rows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                logistic(jll(row, 1) - jll(row, 0))
            })
            .collect();
        Ok(ScoreVector::new(scores))
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
