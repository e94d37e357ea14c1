use super::{
    class_likelihood, class_loss, distances, predict, prototypes, reg_loss, total_loss,
    FewShotError, PROB_FLOOR,
};
use crate::model::{Adam, Float, Network};
use crate::seed::Rng;

/// Mean episode losses with gradients for every embedding and regression
/// output that took part.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLoss {
    pub total: f64,
    pub class_loss: f64,
    pub reg_loss: f64,
    pub correct: usize,
    pub queries: usize,
    pub d_support: Vec<Vec<Vec<f64>>>,
    pub d_queries: Vec<Vec<f64>>,
    pub d_estimates: Vec<f64>,
}

impl EpisodeLoss {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.queries.max(1) as f64
    }
}

/// Embedded episode: support per class, query embeddings, true classes and
/// optionally `(estimates, targets)` of the regression head on the queries.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeTensors<'a> {
    pub support: &'a [Vec<Vec<f64>>],
    pub queries: &'a [Vec<f64>],
    pub classes: &'a [usize],
    pub regression: Option<(&'a [f64], &'a [f64])>,
}

/// Negative log-likelihood of the nearest-prototype softmax averaged over
/// queries, plus the mean absolute regression error when enabled.
pub fn episode_loss(ep: EpisodeTensors<'_>) -> Result<EpisodeLoss, FewShotError> {
    let protos = prototypes(ep.support)?;
    let dim = protos[0].vector.len();
    let nq = ep.queries.len();
    let mut d_protos = vec![vec![0.0; dim]; protos.len()];
    let mut d_queries = Vec::with_capacity(nq);
    let mut class_total = 0.0;
    let mut correct = 0;
    for (q, &c) in ep.queries.iter().zip(ep.classes) {
        let d = distances(q, &protos)?;
        let p = class_likelihood(&d);
        class_total += class_loss(&p, c);
        if predict(&p) == c {
            correct += 1;
        }
        let mut dq = vec![0.0; dim];
        // dL/dd_j = 1[j = c] - p_j, zero once the floor clamps the loss
        if p[c] > PROB_FLOOR {
            for (j, proto) in protos.iter().enumerate() {
                let g = (if j == c { 1.0 } else { 0.0 } - p[j]) / nq as f64;
                if d[j] == 0.0 || g == 0.0 {
                    continue;
                }
                for k in 0..dim {
                    let u = (q[k] - proto.vector[k]) / d[j];
                    dq[k] += g * u;
                    d_protos[j][k] -= g * u;
                }
            }
        }
        d_queries.push(dq);
    }
    let d_support = ep
        .support
        .iter()
        .zip(&d_protos)
        .map(|(shots, dp)| {
            let k = shots.len() as f64;
            vec![dp.iter().map(|v| v / k).collect::<Vec<f64>>(); shots.len()]
        })
        .collect();
    let class_mean = class_total / nq.max(1) as f64;
    let (reg_mean, d_estimates) = match ep.regression {
        Some((est, tgt)) => {
            let n = est.len().max(1) as f64;
            let loss = est
                .iter()
                .zip(tgt)
                .map(|(&e, &t)| reg_loss(t, e))
                .sum::<f64>()
                / n;
            let grads = est
                .iter()
                .zip(tgt)
                .map(|(&e, &t)| {
                    if e > t {
                        1.0 / n
                    } else if e < t {
                        -1.0 / n
                    } else {
                        0.0
                    }
                })
                .collect();
            (loss, grads)
        }
        None => (0.0, vec![0.0; nq]),
    };
    Ok(EpisodeLoss {
        total: total_loss(class_mean, reg_mean, ep.regression.is_some()),
        class_loss: class_mean,
        reg_loss: reg_mean,
        correct,
        queries: nq,
        d_support,
        d_queries,
        d_estimates,
    })
}

fn to_f64<T: Float>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64<T: Float>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of(x)).collect()
}

/// Forward, loss and backward for one episode, followed by an optimizer
/// update when `optimizer` is given.
///
/// `support` holds `n_way * k_shot` maps, class-major; `targets` enables the
/// regression term on the queries.
#[allow(clippy::too_many_arguments)]
pub fn train_step<T: Float>(
    net: &mut Network<T>,
    optimizer: Option<&mut Adam<T>>,
    support: &[&[T]],
    k_shot: usize,
    queries: &[&[T]],
    classes: &[usize],
    targets: Option<&[f64]>,
    dropout: Option<&mut Rng>,
) -> Result<EpisodeLoss, FewShotError> {
    let batch: Vec<&[T]> = support.iter().chain(queries).copied().collect();
    net.zero_grad();
    let out = net.forward(&batch, dropout)?;
    let emb: Vec<Vec<f64>> = out.embeddings.iter().map(|e| to_f64(e)).collect();
    let (sup, qry) = emb.split_at(support.len());
    let grouped: Vec<Vec<Vec<f64>>> = sup.chunks(k_shot.max(1)).map(|c| c.to_vec()).collect();
    let estimates: Vec<f64> = out.regression[support.len()..]
        .iter()
        .map(|r| r.as_f64())
        .collect();
    let loss = episode_loss(EpisodeTensors {
        support: &grouped,
        queries: qry,
        classes,
        regression: targets.map(|t| (estimates.as_slice(), t)),
    })?;
    let mut d_emb: Vec<Vec<T>> = loss
        .d_support
        .iter()
        .flatten()
        .map(|g| from_f64(g))
        .collect();
    d_emb.extend(loss.d_queries.iter().map(|g| from_f64(g)));
    let mut d_reg = vec![T::zero(); support.len()];
    d_reg.extend(loss.d_estimates.iter().map(|&g| T::of(g)));
    net.backward(&d_emb, &d_reg)?;
    if let Some(opt) = optimizer {
        let (params, grads) = net.params_and_grads();
        opt.update(params, grads);
    }
    Ok(loss)
}
