//! Metrics: top-n accuracy, per-class P/R/F1, open-set ROC, regression
//! error, volume bins, grid-position maps and AIR pool similarity.

mod air;
mod openset;
mod position;
mod report;

pub use air::{air_pool_correlation, decay_profile, pearson, DECAY_FLOOR_DB};
pub use openset::{
    open_set_trial, rates_at, roc_auc, OpenSetConfig, OpenSetPool, OpenSetScore, RocCurve,
};
pub use position::{position_accuracy_map, PositionMap};
pub use report::{write_class_csv, write_position_csv, write_summary_json, ClassRow};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default volume range for binning, m^3.
pub const VOLUME_RANGE: (f64, f64) = (10.0, 3750.0);

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} predictions, {1} targets")]
    LengthMismatch(usize, usize),
    #[error("no values to evaluate")]
    Empty,
    #[error("open-set pool cannot supply a trial: {0}")]
    EmptyPool(String),
    #[error("ROC needs both known and unknown scores")]
    SingleClassScores,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Class indices ordered by descending score, lowest index first on ties.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Fraction of queries whose true class is within the first `n` ranks.
pub fn top_n_accuracy(rankings: &[Vec<usize>], truths: &[usize], n: usize) -> f64 {
    if rankings.is_empty() {
        return 0.0;
    }
    let hits = rankings
        .iter()
        .zip(truths)
        .filter(|(r, t)| r.iter().take(n).any(|c| c == *t))
        .count();
    hits as f64 / rankings.len() as f64
}

/// Per-class true positive, false positive and false negative counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTally {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
    pub total: u64,
}

impl ConfusionTally {
    pub fn new(n_classes: usize) -> Self {
        Self {
            tp: vec![0; n_classes],
            fp: vec![0; n_classes],
            fn_: vec![0; n_classes],
            total: 0,
        }
    }

    pub fn record(&mut self, predicted: usize, truth: usize) {
        self.total += 1;
        if predicted == truth {
            self.tp[truth] += 1;
        } else {
            self.fp[predicted] += 1;
            self.fn_[truth] += 1;
        }
    }

    pub fn from_predictions(n_classes: usize, predicted: &[usize], truths: &[usize]) -> Self {
        let mut t = Self::new(n_classes);
        for (&p, &y) in predicted.iter().zip(truths) {
            t.record(p, y);
        }
        t
    }

    pub fn micro_accuracy(&self) -> f64 {
        ratio(self.tp.iter().sum::<u64>() as f64, self.total as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall and F1 per class; any 0/0 is reported as 0.
pub fn prf1(tally: &ConfusionTally) -> Vec<ClassScores> {
    (0..tally.tp.len())
        .map(|c| {
            let tp = tally.tp[c] as f64;
            let precision = ratio(tp, tp + tally.fp[c] as f64);
            let recall = ratio(tp, tp + tally.fn_[c] as f64);
            ClassScores {
                precision,
                recall,
                f1: ratio(2.0 * precision * recall, precision + recall),
            }
        })
        .collect()
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64, EvalError> {
    if predictions.len() != targets.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), targets.len()));
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mse = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / predictions.len() as f64;
    Ok(mse.sqrt())
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Equal-width bin of `value` after clamping into `range`.
pub fn volume_bin(value: f64, n_bins: usize, range: (f64, f64)) -> usize {
    let (lo, hi) = range;
    let v = value.clamp(lo, hi);
    let idx = ((v - lo) / (hi - lo) * n_bins as f64).floor() as usize;
    idx.min(n_bins - 1)
}

/// Fraction of estimates that land in the same volume bin as their target.
pub fn volume_bin_classify(
    estimates: &[f64],
    targets: &[f64],
    n_bins: usize,
    range: (f64, f64),
) -> Result<f64, EvalError> {
    if estimates.len() != targets.len() {
        return Err(EvalError::LengthMismatch(estimates.len(), targets.len()));
    }
    if estimates.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = estimates
        .iter()
        .zip(targets)
        .filter(|(e, t)| volume_bin(**e, n_bins, range) == volume_bin(**t, n_bins, range))
        .count();
    Ok(hits as f64 / estimates.len() as f64)
}

#[cfg(test)]
mod tests;
