//! ROC and precision/recall curves, trapezoidal areas and fixed-threshold
//! operating points. A packet is predicted malicious iff `score >= threshold`.

use std::path::Path;

use crate::classify::ScoreVector;
use crate::error::{Error, Result};
use crate::groundtruth::LabelVector;

pub const DEFAULT_THRESHOLDS: [f64; 6] = [0.1, 0.25, 0.5, 0.75, 0.9, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationCurves {
    pub roc: Vec<RocPoint>,
    pub pr: Vec<PrPoint>,
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub operating_points: Vec<OperatingPoint>,
}

/// Cumulative (threshold, tp, fp) after each group of tied scores.
type Sweep = Vec<(f64, u64, u64)>;

/// Groups tied scores in descending order; also returns the positive and
/// negative totals.
fn sweep(scores: &[f64], labels: &[u8]) -> Result<(Sweep, u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidParameter(format!(
            "score {bad} is not a number"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|a, b| scores[*b].total_cmp(&scores[*a]));
    let mut steps = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        steps.push((s, tp, fp));
    }
    Ok((steps, tp, fp))
}

fn trapezoid(xy: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut area = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (x, y) in xy {
        if let Some((px, py)) = prev {
            area += (x - px) * (y + py) / 2.0;
        }
        prev = Some((x, y));
    }
    area
}

/// Points start at `(0, 0)` with an infinite threshold and end at `(1, 1)`.
pub fn roc_curve(scores: &ScoreVector, labels: &LabelVector) -> Result<(Vec<RocPoint>, f64)> {
    let (steps, p, n) = sweep(scores.scores(), labels.labels())?;
    if p == 0 || n == 0 {
        return Err(Error::Undefined(format!(
            "ROC needs both classes, got {p} positives and {n} negatives"
        )));
    }
    let mut pts = Vec::with_capacity(steps.len() + 1);
    pts.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    });
    pts.extend(steps.iter().map(|&(t, tp, fp)| RocPoint {
        fpr: fp as f64 / n as f64,
        tpr: tp as f64 / p as f64,
        threshold: t,
    }));
    let auc = trapezoid(pts.iter().map(|q| (q.fpr, q.tpr)));
    Ok((pts, auc.clamp(0.0, 1.0)))
}

/// Points start at the conventional `(recall 0, precision 1)` endpoint.
pub fn pr_curve(scores: &ScoreVector, labels: &LabelVector) -> Result<(Vec<PrPoint>, f64)> {
    let (steps, p, _) = sweep(scores.scores(), labels.labels())?;
    if p == 0 {
        return Err(Error::Undefined(
            "precision/recall needs a positive label".into(),
        ));
    }
    let mut pts = Vec::with_capacity(steps.len() + 1);
    pts.push(PrPoint {
        recall: 0.0,
        precision: 1.0,
        threshold: f64::INFINITY,
    });
    pts.extend(steps.iter().map(|&(t, tp, fp)| PrPoint {
        recall: tp as f64 / p as f64,
        precision: tp as f64 / (tp + fp) as f64,
        threshold: t,
    }));
    let auc = trapezoid(pts.iter().map(|q| (q.recall, q.precision)));
    Ok((pts, auc.clamp(0.0, 1.0)))
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 at each threshold; undefined ratios are 0.
pub fn operating_points(
    scores: &ScoreVector,
    labels: &LabelVector,
    thresholds: &[f64],
) -> Result<Vec<OperatingPoint>> {
    let (s, y) = (scores.scores(), labels.labels());
    if s.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            s.len(),
            y.len()
        )));
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
            for (score, label) in s.iter().zip(y) {
                match (*score >= t, *label == 1) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fneg += 1,
                    (false, false) => {}
                }
            }
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fneg);
            OperatingPoint {
                precision,
                recall,
                threshold: t,
                f1: f1_score(precision, recall),
            }
        })
        .collect())
}

pub fn evaluate(
    scores: &ScoreVector,
    labels: &LabelVector,
    thresholds: &[f64],
) -> Result<EvaluationCurves> {
    let (roc, auc_roc) = roc_curve(scores, labels)?;
    let (pr, auc_pr) = pr_curve(scores, labels)?;
    let operating_points = operating_points(scores, labels, thresholds)?;
    Ok(EvaluationCurves {
        roc,
        pr,
        auc_roc,
        auc_pr,
        operating_points,
    })
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = [f64; 3]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

impl EvaluationCurves {
    /// `auc_roc=<v>,auc_pr=<v>`
    pub fn summary_line(&self) -> String {
        format!("auc_roc={:.6},auc_pr={:.6}", self.auc_roc, self.auc_pr)
    }

    pub fn write_roc_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(
            path.as_ref(),
            &["threshold", "fpr", "tpr"],
            self.roc.iter().map(|p| [p.threshold, p.fpr, p.tpr]),
        )
    }

    pub fn write_pr_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(
            path.as_ref(),
            &["threshold", "recall", "precision"],
            self.pr.iter().map(|p| [p.threshold, p.recall, p.precision]),
        )
    }

    pub fn operating_table(&self) -> String {
        let mut out = String::from("precision  recall  threshold  f1\n");
        for p in &self.operating_points {
            out.push_str(&format!(
                "{:<9.3}  {:<6.3}  {:<9}  {:.3}\n",
                p.precision, p.recall, p.threshold, p.f1
            ));
        }
        out
    }
}
