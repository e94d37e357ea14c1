//! Prototypical-network episodes: prototypes, distance softmax, losses,
//! prediction and open-set rejection.

mod episode;
mod train;

pub use episode::{sample_episode, Episode, EpisodeConfig, Query};
pub use train::{episode_loss, train_step, EpisodeLoss, EpisodeTensors};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floor applied to the true-class probability inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FewShotError {
    #[error("need {requested} classes, dataset has {available}")]
    InsufficientClasses { requested: usize, available: usize },
    #[error("class {class} has {available} samples, needs more than {k_shot}")]
    InsufficientSamples {
        class: usize,
        k_shot: usize,
        available: usize,
    },
    #[error("class {0} has no support embeddings")]
    EmptySupport(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub class: usize,
    pub vector: Vec<f64>,
}

/// Mean support embedding per class, in class order.
pub fn prototypes(support: &[Vec<Vec<f64>>]) -> Result<Vec<Prototype>, FewShotError> {
    let mut out = Vec::with_capacity(support.len());
    for (class, shots) in support.iter().enumerate() {
        let first = shots.first().ok_or(FewShotError::EmptySupport(class))?;
        let mut mean = vec![0.0; first.len()];
        for s in shots {
            if s.len() != mean.len() {
                return Err(FewShotError::DimensionMismatch {
                    expected: mean.len(),
                    got: s.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        let k = shots.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        out.push(Prototype {
            class,
            vector: mean,
        });
    }
    Ok(out)
}

/// Euclidean distance from a query to every prototype.
pub fn distances(query: &[f64], protos: &[Prototype]) -> Result<Vec<f64>, FewShotError> {
    protos
        .iter()
        .map(|p| {
            if p.vector.len() != query.len() {
                return Err(FewShotError::DimensionMismatch {
                    expected: p.vector.len(),
                    got: query.len(),
                });
            }
            Ok(p.vector
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt())
        })
        .collect()
}

/// Softmax over negated distances.
pub fn class_likelihood(distances: &[f64]) -> Vec<f64> {
    let best = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = distances.iter().map(|d| (best - d).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Negative log-likelihood of the true class.
pub fn class_loss(likelihoods: &[f64], true_class: usize) -> f64 {
    -likelihoods[true_class].max(PROB_FLOOR).ln()
}

pub fn reg_loss(target: f64, estimate: f64) -> f64 {
    (target - estimate).abs()
}

pub fn total_loss(class_term: f64, reg_term: f64, regression: bool) -> f64 {
    if regression {
        class_term + reg_term
    } else {
        class_term
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn predict(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRule {
    pub threshold: f64,
}

impl RejectionRule {
    pub fn new(threshold: f64) -> Option<Self> {
        (threshold >= 0.0).then_some(Self { threshold })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept(usize),
    Reject,
}

/// Rejects when even the nearest prototype is farther than the threshold.
pub fn reject_unknown(distances: &[f64], rule: RejectionRule) -> Decision {
    let negated: Vec<f64> = distances.iter().map(|d| -d).collect();
    let nearest = predict(&negated);
    if distances[nearest] > rule.threshold {
        Decision::Reject
    } else {
        Decision::Accept(nearest)
    }
}
