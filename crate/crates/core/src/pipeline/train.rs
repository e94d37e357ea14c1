use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::evaluate::embed_records;
use super::manifest::{Dataset, RecordLabels, Split};
use super::PipelineError;
use crate::fewshot::{
    distances, predict, prototypes, sample_episode, train_step, Episode, EpisodeConfig,
};
use crate::model::{Adam, BackboneConfig, Checkpoint, ModelConfig, Network};
use crate::seed::{child_rng, Stage};

pub const CHECKPOINT_FILE: &str = "best.ckpt";
pub const LOG_FILE: &str = "train_log.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionTarget {
    Rt60,
    Volume,
}

impl RegressionTarget {
    pub fn label(self, labels: &RecordLabels) -> Option<f64> {
        match self {
            Self::Rt60 => labels.rt60,
            Self::Volume => labels.volume,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_way: usize,
    pub k_shot: usize,
    pub query_cap: Option<usize>,
    pub episodes_per_epoch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub regression: bool,
    pub regression_target: RegressionTarget,
    /// Regress the natural log of the target instead of the target.
    pub log_target: bool,
    /// Fixed validation episodes scored after every epoch.
    pub validation_episodes: usize,
    pub model: ModelConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_way: 10,
            k_shot: 15,
            query_cap: Some(8),
            episodes_per_epoch: 100,
            max_epochs: 300,
            patience: 30,
            lr: 1e-4,
            regression: true,
            regression_target: RegressionTarget::Rt60,
            log_target: false,
            validation_episodes: 50,
            model: ModelConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// 3-way 5-shot episodes on a reduced backbone, sized for a single CPU
    /// core in well under half an hour on the desk dataset.
    pub fn desk(seed: u64) -> Self {
        Self {
            n_way: 3,
            k_shot: 5,
            query_cap: Some(5),
            episodes_per_epoch: 20,
            max_epochs: 30,
            patience: 30,
            lr: 1e-3,
            validation_episodes: 30,
            model: ModelConfig {
                backbone: BackboneConfig {
                    conv_channels: vec![8, 16, 32, 32, 64],
                    dense_dim: 128,
                    ..BackboneConfig::default()
                },
                embed_dim: 64,
                regression_hidden: 64,
            },
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let counts = [
            ("n_way", self.n_way),
            ("k_shot", self.k_shot),
            ("episodes_per_epoch", self.episodes_per_epoch),
            ("max_epochs", self.max_epochs),
            ("validation_episodes", self.validation_episodes),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(PipelineError::Config(format!("{name} must be positive")));
        }
        if self.n_way < 2 {
            return Err(PipelineError::Config("n_way must be at least 2".into()));
        }
        if self.patience > self.max_epochs {
            return Err(PipelineError::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if self.query_cap == Some(0) {
            return Err(PipelineError::Config("query_cap must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(PipelineError::Config("lr must be positive".into()));
        }
        self.model.validate()?;
        Ok(())
    }

    fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            n_way: self.n_way,
            k_shot: self.k_shot,
            query_cap: self.query_cap,
            fallback: false,
        }
    }
}

/// Standardization applied to regression targets during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetNorm {
    pub target: RegressionTarget,
    /// Mean and std are of ln(target) when set.
    #[serde(default)]
    pub log: bool,
    pub mean: f64,
    pub std: f64,
}

impl TargetNorm {
    pub fn normalize(&self, v: f64) -> f64 {
        let v = if self.log { v.ln() } else { v };
        (v - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        let v = z * self.std + self.mean;
        if self.log {
            v.exp()
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_class_loss: f64,
    pub train_reg_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub best_val_accuracy: f64,
    /// Lowest mean training loss so far.
    pub best_loss: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub config: TrainConfig,
    pub target_norm: Option<TargetNorm>,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
}

/// Best checkpoint and the log of the run that produced it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
}

impl TrainedModel {
    /// Reads `best.ckpt` and `train_log.json` from a run directory.
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let checkpoint = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
        let log = serde_json::from_str(&fs::read_to_string(dir.join(LOG_FILE))?)?;
        Ok(Self { checkpoint, log })
    }

    pub fn network(&self) -> Result<Network<f32>, PipelineError> {
        Ok(Network::from_params(
            self.checkpoint.config.clone(),
            self.checkpoint.params.clone(),
        )?)
    }
}

fn class_lists(
    dataset: &Dataset,
    split: Split,
    config: &TrainConfig,
) -> Result<Vec<Vec<usize>>, PipelineError> {
    let groups: Vec<Vec<usize>> = dataset
        .manifest
        .by_class(split)
        .into_iter()
        .map(|(_, members)| members)
        .collect();
    if groups.is_empty() {
        return Err(PipelineError::MissingSplit(split));
    }
    if groups.len() < config.n_way {
        return Err(crate::fewshot::FewShotError::InsufficientClasses {
            requested: config.n_way,
            available: groups.len(),
        }
        .into());
    }
    Ok(groups)
}

fn target_norm(
    dataset: &Dataset,
    target: RegressionTarget,
    log: bool,
) -> Result<TargetNorm, PipelineError> {
    let values: Vec<f64> = dataset
        .manifest
        .split(Split::Train)
        .map(|r| {
            target.label(&r.labels).ok_or_else(|| {
                PipelineError::Config(format!(
                    "record {} has no {target:?} label for regression",
                    r.index
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    if log && values.iter().any(|&v| !(v > 0.0)) {
        return Err(PipelineError::Config(format!(
            "{target:?} labels must be positive for a log target"
        )));
    }
    let values: Vec<f64> = if log {
        values.iter().map(|v| v.ln()).collect()
    } else {
        values
    };
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let std = crate::eval::std_dev(&values);
    Ok(TargetNorm {
        target,
        log,
        mean,
        std: if std > 0.0 { std } else { 1.0 },
    })
}

/// Mean accuracy over the fixed validation episodes. Sample ids in the
/// episodes are record positions; `rows` maps them to embedding rows.
fn validation_accuracy(
    episodes: &[Episode],
    embeddings: &[Vec<f64>],
    rows: &[usize],
) -> Result<f64, PipelineError> {
    let mut total = 0.0;
    for ep in episodes {
        let support: Vec<Vec<Vec<f64>>> = ep
            .support
            .iter()
            .map(|c| c.iter().map(|&s| embeddings[rows[s]].clone()).collect())
            .collect();
        let protos = prototypes(&support)?;
        let mut correct = 0usize;
        for q in &ep.queries {
            let d = distances(&embeddings[rows[q.sample]], &protos)?;
            let scores: Vec<f64> = d.iter().map(|v| -v).collect();
            correct += (predict(&scores) == q.class) as usize;
        }
        total += correct as f64 / ep.queries.len().max(1) as f64;
    }
    Ok(total / episodes.len() as f64)
}

/// Episodic training with early stopping on validation accuracy. Writes the
/// best checkpoint and the training log to `out`.
pub fn train(
    dataset: &Dataset,
    config: &TrainConfig,
    out: &Path,
) -> Result<TrainedModel, PipelineError> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let records = &dataset.manifest.records;
    let train_classes = class_lists(dataset, Split::Train, config)?;
    let val_classes = dataset
        .manifest
        .by_class(Split::Val)
        .into_iter()
        .map(|(_, m)| m)
        .collect::<Vec<_>>();
    if val_classes.is_empty() {
        return Err(PipelineError::MissingSplit(Split::Val));
    }

    let norm = if config.regression {
        Some(target_norm(
            dataset,
            config.regression_target,
            config.log_target,
        )?)
    } else {
        None
    };
    let targets: Option<Vec<f64>> = norm.map(|n| {
        records
            .iter()
            .map(|r| {
                n.target
                    .label(&r.labels)
                    .map_or(f64::NAN, |v| n.normalize(v))
            })
            .collect()
    });

    let val_config = EpisodeConfig {
        fallback: true,
        ..config.episode()
    };
    let val_episodes: Vec<Episode> = (0..config.validation_episodes as u64)
        .map(|v| {
            sample_episode(
                &val_classes,
                None,
                val_config,
                &mut child_rng(config.seed, v, Stage::Validation),
            )
        })
        .collect::<Result<_, _>>()?;
    let val_positions: Vec<usize> = val_classes.iter().flatten().copied().collect();
    let mut val_rows = vec![usize::MAX; records.len()];
    for (row, &pos) in val_positions.iter().enumerate() {
        val_rows[pos] = row;
    }

    let mut net = Network::<f32>::new(
        config.model.clone(),
        &mut child_rng(config.seed, 0, Stage::Init),
    )?;
    let mut adam = Adam::new(net.param_count(), config.lr);
    let mut log = TrainLog {
        config: config.clone(),
        target_norm: norm,
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_accuracy: f64::NEG_INFINITY,
        stopped_early: false,
    };
    let mut best_loss = f64::INFINITY;
    let mut since_best = 0usize;
    let load = |pos: usize| dataset.features(&records[pos]).map(|m| m.values);

    for epoch in 1..=config.max_epochs {
        let mut episode_rng = child_rng(config.seed, epoch as u64, Stage::Episode);
        let mut dropout_rng = child_rng(config.seed, epoch as u64, Stage::Dropout);
        let (mut loss, mut class_loss, mut reg_loss, mut acc) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..config.episodes_per_epoch {
            let ep = sample_episode(
                &train_classes,
                targets.as_deref(),
                config.episode(),
                &mut episode_rng,
            )?;
            let support: Vec<Vec<f32>> = ep
                .support
                .iter()
                .flatten()
                .map(|&p| load(p))
                .collect::<Result<_, _>>()?;
            let queries: Vec<Vec<f32>> = ep
                .queries
                .iter()
                .map(|q| load(q.sample))
                .collect::<Result<_, _>>()?;
            let classes: Vec<usize> = ep.queries.iter().map(|q| q.class).collect();
            let query_targets: Option<Vec<f64>> = targets.as_ref().map(|_| {
                ep.queries
                    .iter()
                    .map(|q| q.target.unwrap_or(f64::NAN))
                    .collect()
            });
            let s_refs: Vec<&[f32]> = support.iter().map(Vec::as_slice).collect();
            let q_refs: Vec<&[f32]> = queries.iter().map(Vec::as_slice).collect();
            let result = train_step(
                &mut net,
                Some(&mut adam),
                &s_refs,
                ep.k_shot,
                &q_refs,
                &classes,
                query_targets.as_deref(),
                Some(&mut dropout_rng),
            )?;
            loss += result.total;
            class_loss += result.class_loss;
            reg_loss += result.reg_loss;
            acc += result.accuracy();
        }
        let n = config.episodes_per_epoch as f64;
        let (loss, class_loss, reg_loss, acc) = (loss / n, class_loss / n, reg_loss / n, acc / n);

        let (val_embeddings, _) = embed_records(&net, dataset, &val_positions)?;
        let val_accuracy = validation_accuracy(&val_episodes, &val_embeddings, &val_rows)?;
        let improved = val_accuracy > log.best_val_accuracy;
        best_loss = best_loss.min(loss);
        if improved {
            log.best_val_accuracy = val_accuracy;
            log.best_epoch = epoch;
            since_best = 0;
            Checkpoint {
                config: config.model.clone(),
                params: net.params().to_vec(),
                optimizer: adam.clone(),
                epoch: epoch as u32,
                validation_metric: val_accuracy,
                rng: Some(episode_rng.clone()),
            }
            .save(&out.join(CHECKPOINT_FILE))?;
        } else {
            since_best += 1;
        }
        log::info!(
            "epoch {epoch}: loss {loss:.4} (class {class_loss:.4}, reg {reg_loss:.4}), train acc {acc:.3}, val acc {val_accuracy:.3}{}",
            if improved { " *" } else { "" }
        );
        log.epochs.push(EpochLog {
            epoch,
            train_loss: loss,
            train_class_loss: class_loss,
            train_reg_loss: reg_loss,
            train_accuracy: acc,
            val_accuracy,
            best_val_accuracy: log.best_val_accuracy,
            best_loss,
            improved,
        });
        if since_best >= config.patience {
            log.stopped_early = epoch < config.max_epochs;
            break;
        }
    }

    let mut text = serde_json::to_string_pretty(&log)?;
    text.push('\n');
    fs::write(out.join(LOG_FILE), text)?;
    TrainedModel::load(out)
}
