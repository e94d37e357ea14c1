use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::fewshot::{distances, prototypes};
use crate::seed::Rng;

/// Embedded samples grouped by class; references and queries come from the
/// same lists but never coincide within a trial.
#[derive(Debug, Clone, Default)]
pub struct OpenSetPool {
    pub classes: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenSetConfig {
    pub trials: usize,
    pub n_way: usize,
    pub k_shot: usize,
    /// Probability that the query's own class is among the candidates.
    pub p_known: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenSetScore {
    /// Distance to the nearest candidate prototype.
    pub distance: f64,
    pub known: bool,
}

/// Runs open-set trials: each draws a query, and with probability
/// `p_known` its class joins `n_way - 1` others as candidates; otherwise
/// `n_way` other classes are offered.
pub fn open_set_trial(
    pool: &OpenSetPool,
    config: OpenSetConfig,
    rng: &mut Rng,
) -> Result<Vec<OpenSetScore>, EvalError> {
    let n = pool.classes.len();
    if n <= config.n_way {
        return Err(EvalError::EmptyPool(format!(
            "{n} classes; an unknown trial needs at least {}",
            config.n_way + 1
        )));
    }
    if let Some(c) = pool.classes.iter().position(|s| s.len() <= config.k_shot) {
        return Err(EvalError::EmptyPool(format!(
            "class {c} has {} samples, needs more than {}",
            pool.classes[c].len(),
            config.k_shot
        )));
    }
    let mut out = Vec::with_capacity(config.trials);
    for _ in 0..config.trials {
        let class = rng.gen_range(0..n);
        let known = rng.gen::<f64>() < config.p_known;
        let others: Vec<usize> = (0..n).filter(|&c| c != class).collect();
        let take = if known {
            config.n_way - 1
        } else {
            config.n_way
        };
        let mut candidates: Vec<usize> = index::sample(rng, others.len(), take)
            .iter()
            .map(|i| others[i])
            .collect();
        if known {
            candidates.push(class);
        }
        let own = &pool.classes[class];
        let q = rng.gen_range(0..own.len());
        let support: Vec<Vec<Vec<f64>>> = candidates
            .iter()
            .map(|&c| {
                let members: Vec<usize> = (0..pool.classes[c].len())
                    .filter(|&i| c != class || i != q)
                    .collect();
                members
                    .choose_multiple(rng, config.k_shot)
                    .map(|&i| pool.classes[c][i].clone())
                    .collect()
            })
            .collect();
        let protos = prototypes(&support).map_err(|e| EvalError::EmptyPool(e.to_string()))?;
        let d = distances(&own[q], &protos).map_err(|e| EvalError::EmptyPool(e.to_string()))?;
        out.push(OpenSetScore {
            distance: d.iter().copied().fold(f64::INFINITY, f64::min),
            known,
        });
    }
    Ok(out)
}

/// ROC of the rule "reject when distance > threshold", positives being
/// unknown queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    /// Threshold realizing each point. The end points sit at +inf and -inf,
    /// written to JSON as the strings "inf" and "-inf".
    #[serde(with = "thresholds")]
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

mod thresholds {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Value {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        values
            .iter()
            .map(|&v| match v {
                v if v.is_finite() => Value::Number(v),
                v if v > 0.0 => Value::Text("inf".into()),
                v if v < 0.0 => Value::Text("-inf".into()),
                _ => Value::Text("nan".into()),
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Value>::deserialize(d)?
            .into_iter()
            .map(|v| match v {
                Value::Number(n) => Ok(n),
                Value::Text(t) => match t.as_str() {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(serde::de::Error::custom(format!("bad threshold {other:?}"))),
                },
            })
            .collect()
    }
}

/// Rejected fraction of (known, unknown) queries at a threshold.
pub fn rates_at(scores: &[OpenSetScore], threshold: f64) -> (f64, f64) {
    let count = |known: bool| {
        let all = scores.iter().filter(|s| s.known == known).count();
        let rejected = scores
            .iter()
            .filter(|s| s.known == known && s.distance > threshold)
            .count();
        rejected as f64 / all.max(1) as f64
    };
    (count(true), count(false))
}

pub fn roc_auc(scores: &[OpenSetScore]) -> Result<RocCurve, EvalError> {
    let unknown = scores.iter().filter(|s| !s.known).count();
    let known = scores.len() - unknown;
    if unknown == 0 || known == 0 {
        return Err(EvalError::SingleClassScores);
    }
    let mut sorted: Vec<OpenSetScore> = scores.to_vec();
    sorted.sort_by(|a, b| b.distance.total_cmp(&a.distance));
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut fp, mut tp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let value = sorted[i].distance;
        while i < sorted.len() && sorted[i].distance == value {
            if sorted[i].known {
                fp += 1;
            } else {
                tp += 1;
            }
            i += 1;
        }
        // everything at or above `value` is rejected once the threshold drops
        // to the next distinct distance
        let next = sorted.get(i).map_or(f64::NEG_INFINITY, |s| s.distance);
        points.push((fp as f64 / known as f64, tp as f64 / unknown as f64));
        thresholds.push(next);
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(RocCurve {
        points,
        thresholds,
        auc,
    })
}
