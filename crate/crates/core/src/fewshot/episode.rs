use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::FewShotError;
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub n_way: usize,
    pub k_shot: usize,
    /// Most queries drawn per class; `None` keeps every remaining sample.
    pub query_cap: Option<usize>,
    /// Shrink to the available class count instead of failing.
    pub fallback: bool,
}

impl EpisodeConfig {
    pub fn new(n_way: usize, k_shot: usize) -> Self {
        Self {
            n_way,
            k_shot,
            query_cap: Some(8),
            fallback: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub sample: usize,
    /// Position of the true class within the episode.
    pub class: usize,
    pub target: Option<f64>,
}

/// Sample indices drawn for one N-way K-shot trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub n_way: usize,
    pub k_shot: usize,
    /// Dataset class of each episode class.
    pub classes: Vec<usize>,
    pub support: Vec<Vec<usize>>,
    pub queries: Vec<Query>,
}

/// Draws an episode from per-class sample lists. `targets`, when given, is
/// indexed by sample and attached to every query.
pub fn sample_episode(
    classes: &[Vec<usize>],
    targets: Option<&[f64]>,
    config: EpisodeConfig,
    rng: &mut Rng,
) -> Result<Episode, FewShotError> {
    let mut n_way = config.n_way;
    if classes.len() < n_way {
        if config.fallback && classes.len() >= 2 {
            n_way = classes.len();
        } else {
            return Err(FewShotError::InsufficientClasses {
                requested: n_way,
                available: classes.len(),
            });
        }
    }
    let chosen = index::sample(rng, classes.len(), n_way).into_vec();
    let mut support = Vec::with_capacity(n_way);
    let mut queries = Vec::new();
    for (pos, &c) in chosen.iter().enumerate() {
        let pool = &classes[c];
        if pool.len() <= config.k_shot {
            return Err(FewShotError::InsufficientSamples {
                class: c,
                k_shot: config.k_shot,
                available: pool.len(),
            });
        }
        let mut order = pool.clone();
        order.shuffle(rng);
        let rest = &order[config.k_shot..];
        let take = config
            .query_cap
            .map_or(rest.len(), |cap| cap.min(rest.len()));
        queries.extend(rest[..take].iter().map(|&s| Query {
            sample: s,
            class: pos,
            target: targets.map(|t| t[s]),
        }));
        support.push(order[..config.k_shot].to_vec());
    }
    Ok(Episode {
        n_way,
        k_shot: config.k_shot,
        classes: chosen,
        support,
        queries,
    })
}
