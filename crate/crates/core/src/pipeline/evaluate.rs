use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Dataset, Split};
use super::train::{RegressionTarget, TrainedModel};
use super::PipelineError;
use crate::eval::{
    open_set_trial, position_accuracy_map, prf1, ranking, rmse, roc_auc, std_dev, top_n_accuracy,
    volume_bin_classify, write_class_csv, write_position_csv, write_summary_json, ClassRow,
    ConfusionTally, OpenSetConfig, OpenSetPool, PositionMap, RocCurve, VOLUME_RANGE,
};
use crate::fewshot::{distances, prototypes, sample_episode, EpisodeConfig};
use crate::model::Network;
use crate::room_sim::GridIndex;
use crate::seed::{child_rng, derive, Stage};

const EMBED_BATCH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Closed,
    Open,
    Ksweep,
    Positions,
    Regress,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Self::Closed,
        Self::Open,
        Self::Ksweep,
        Self::Positions,
        Self::Regress,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Closed => "closed",
            Self::Open => "open",
            Self::Ksweep => "ksweep",
            Self::Positions => "positions",
            Self::Regress => "regress",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown protocol {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_way: usize,
    pub k_shot: usize,
    pub query_cap: Option<usize>,
    pub episodes: usize,
    pub top_n: Vec<usize>,
    pub open_trials: usize,
    pub p_known: f64,
    pub k_values: Vec<usize>,
    pub volume_bins: Vec<usize>,
    pub volume_range: (f64, f64),
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_way: 10,
            k_shot: 15,
            query_cap: Some(8),
            episodes: 100,
            top_n: vec![1, 2, 3],
            open_trials: 1000,
            p_known: 0.5,
            k_values: (1..=15).collect(),
            volume_bins: vec![2, 3, 5, 10],
            volume_range: VOLUME_RANGE,
            seed: 0,
        }
    }
}

impl EvalConfig {
    /// 3-way 5-shot episodes matching [`TrainConfig::desk`](super::TrainConfig::desk).
    pub fn desk(seed: u64) -> Self {
        Self {
            n_way: 3,
            k_shot: 5,
            query_cap: Some(5),
            episodes: 200,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedReport {
    pub n_way: usize,
    pub k_shot: usize,
    pub episodes: usize,
    pub queries: usize,
    /// Fraction of all queries classified correctly.
    pub accuracy: f64,
    pub mean_episode_accuracy: f64,
    /// `(n, top-n accuracy)`.
    pub top_n: Vec<(usize, f64)>,
    pub classes: Vec<ClassRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenReport {
    pub n_way: usize,
    pub k_shot: usize,
    pub trials: usize,
    pub p_known: f64,
    pub known: usize,
    pub unknown: usize,
    pub auc: f64,
    pub curve: RocCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k_shot: usize,
    pub accuracy: f64,
    pub mean_episode_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepReport {
    pub n_way: usize,
    pub episodes: usize,
    pub rows: Vec<KSweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionReport {
    pub n_way: usize,
    pub k_shot: usize,
    pub accuracy: f64,
    pub map: PositionMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub target: RegressionTarget,
    pub samples: usize,
    pub rmse: f64,
    pub target_std: f64,
    /// `rmse / target_std`; below 1 beats predicting the mean.
    pub rmse_ratio: f64,
    pub volume_range: Option<(f64, f64)>,
    /// `(bins, accuracy)`; only for volume models.
    pub volume_bins: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "protocol")]
pub enum Report {
    Closed(ClosedReport),
    Open(OpenReport),
    Ksweep(KSweepReport),
    Positions(PositionReport),
    Regress(RegressionReport),
}

/// Embeddings and raw regression outputs of the records at `positions`.
pub fn embed_records(
    net: &Network<f32>,
    dataset: &Dataset,
    positions: &[usize],
) -> Result<(Vec<Vec<f64>>, Vec<f64>), PipelineError> {
    let chunks: Vec<(Vec<Vec<f64>>, Vec<f64>)> = positions
        .par_chunks(EMBED_BATCH)
        .map(|chunk| {
            let maps: Vec<Vec<f32>> = chunk
                .iter()
                .map(|&p| {
                    dataset
                        .features(&dataset.manifest.records[p])
                        .map(|m| m.values)
                })
                .collect::<Result<_, _>>()?;
            let refs: Vec<&[f32]> = maps.iter().map(Vec::as_slice).collect();
            let out = net.infer(&refs)?;
            Ok((
                out.embeddings
                    .into_iter()
                    .map(|e| e.into_iter().map(f64::from).collect())
                    .collect(),
                out.regression.into_iter().map(f64::from).collect(),
            ))
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut embeddings = Vec::with_capacity(positions.len());
    let mut regression = Vec::with_capacity(positions.len());
    for (e, r) in chunks {
        embeddings.extend(e);
        regression.extend(r);
    }
    Ok((embeddings, regression))
}

/// Test split embedded once: groups hold rows into `embeddings`.
struct TestSet {
    positions: Vec<usize>,
    classes: Vec<usize>,
    groups: Vec<Vec<usize>>,
    embeddings: Vec<Vec<f64>>,
    regression: Vec<f64>,
}

impl TestSet {
    fn build(net: &Network<f32>, dataset: &Dataset) -> Result<Self, PipelineError> {
        let by_class = dataset.manifest.by_class(Split::Test);
        if by_class.is_empty() {
            return Err(PipelineError::MissingSplit(Split::Test));
        }
        let mut positions = Vec::new();
        let mut classes = Vec::new();
        let mut groups = Vec::new();
        for (class, members) in by_class {
            classes.push(class);
            groups.push((positions.len()..positions.len() + members.len()).collect());
            positions.extend(members);
        }
        let (embeddings, regression) = embed_records(net, dataset, &positions)?;
        Ok(Self {
            positions,
            classes,
            groups,
            embeddings,
            regression,
        })
    }
}

/// One classified query of a closed-set episode.
struct QueryOutcome {
    row: usize,
    ranking: Vec<usize>,
    truth: usize,
    /// Dataset classes predicted and true.
    predicted_class: usize,
    true_class: usize,
}

fn closed_episodes(
    test: &TestSet,
    n_way: usize,
    k_shot: usize,
    config: &EvalConfig,
    stream: u64,
) -> Result<Vec<Vec<QueryOutcome>>, PipelineError> {
    let ep_config = EpisodeConfig {
        n_way,
        k_shot,
        query_cap: config.query_cap,
        fallback: false,
    };
    let base = derive(config.seed, stream, Stage::Evaluation);
    (0..config.episodes as u64)
        .map(|e| {
            let ep = sample_episode(
                &test.groups,
                None,
                ep_config,
                &mut child_rng(base, e, Stage::Evaluation),
            )?;
            let support: Vec<Vec<Vec<f64>>> = ep
                .support
                .iter()
                .map(|c| c.iter().map(|&r| test.embeddings[r].clone()).collect())
                .collect();
            let protos = prototypes(&support)?;
            ep.queries
                .iter()
                .map(|q| {
                    let d = distances(&test.embeddings[q.sample], &protos)?;
                    let scores: Vec<f64> = d.iter().map(|v| -v).collect();
                    let ranking = ranking(&scores);
                    Ok(QueryOutcome {
                        row: q.sample,
                        predicted_class: test.classes[ep.classes[ranking[0]]],
                        true_class: test.classes[ep.classes[q.class]],
                        truth: q.class,
                        ranking,
                    })
                })
                .collect()
        })
        .collect()
}

fn accuracies(outcomes: &[Vec<QueryOutcome>]) -> (f64, f64, usize) {
    let queries: usize = outcomes.iter().map(Vec::len).sum();
    let correct = outcomes
        .iter()
        .flatten()
        .filter(|q| q.ranking[0] == q.truth)
        .count();
    let mean_episode = outcomes
        .iter()
        .map(|ep| {
            ep.iter().filter(|q| q.ranking[0] == q.truth).count() as f64 / ep.len().max(1) as f64
        })
        .sum::<f64>()
        / outcomes.len().max(1) as f64;
    (
        correct as f64 / queries.max(1) as f64,
        mean_episode,
        queries,
    )
}

fn closed_way(
    protocol: Protocol,
    test: &TestSet,
    requested: usize,
) -> Result<usize, PipelineError> {
    let n_way = requested.min(test.classes.len());
    if n_way < 2 {
        return Err(PipelineError::ProtocolMismatch {
            protocol,
            reason: format!("test split has {} class(es)", test.classes.len()),
        });
    }
    Ok(n_way)
}

fn closed(
    dataset: &Dataset,
    test: &TestSet,
    config: &EvalConfig,
    out: &Path,
) -> Result<ClosedReport, PipelineError> {
    let n_way = closed_way(Protocol::Closed, test, config.n_way)?;
    let outcomes = closed_episodes(test, n_way, config.k_shot, config, 0)?;
    let (accuracy, mean_episode_accuracy, queries) = accuracies(&outcomes);
    let all: Vec<&QueryOutcome> = outcomes.iter().flatten().collect();
    let rankings: Vec<Vec<usize>> = all.iter().map(|q| q.ranking.clone()).collect();
    let truths: Vec<usize> = all.iter().map(|q| q.truth).collect();
    let top_n = config
        .top_n
        .iter()
        .filter(|&&n| n >= 1 && n <= n_way)
        .map(|&n| (n, top_n_accuracy(&rankings, &truths, n)))
        .collect();
    let mut tally = ConfusionTally::new(dataset.manifest.classes.len());
    for q in &all {
        tally.record(q.predicted_class, q.true_class);
    }
    let scores = prf1(&tally);
    let classes: Vec<ClassRow> = test
        .classes
        .iter()
        .map(|&c| {
            ClassRow::new(
                dataset.manifest.classes[c].clone(),
                tally.tp[c] + tally.fn_[c],
                scores[c],
            )
        })
        .collect();
    write_class_csv(&out.join("closed_classes.csv"), &classes)?;
    Ok(ClosedReport {
        n_way,
        k_shot: config.k_shot,
        episodes: config.episodes,
        queries,
        accuracy,
        mean_episode_accuracy,
        top_n,
        classes,
    })
}

fn open(test: &TestSet, config: &EvalConfig) -> Result<OpenReport, PipelineError> {
    let n_classes = test.classes.len();
    if n_classes < 3 {
        return Err(PipelineError::ProtocolMismatch {
            protocol: Protocol::Open,
            reason: format!("open-set trials need at least 3 test classes, found {n_classes}"),
        });
    }
    let n_way = config.n_way.min(n_classes - 1);
    let pool = OpenSetPool {
        classes: test
            .groups
            .iter()
            .map(|g| g.iter().map(|&r| test.embeddings[r].clone()).collect())
            .collect(),
    };
    let open_config = OpenSetConfig {
        trials: config.open_trials,
        n_way,
        k_shot: config.k_shot,
        p_known: config.p_known,
    };
    let mut rng = child_rng(
        derive(config.seed, 1, Stage::Evaluation),
        0,
        Stage::Evaluation,
    );
    let scores = open_set_trial(&pool, open_config, &mut rng)?;
    let curve = roc_auc(&scores)?;
    let known = scores.iter().filter(|s| s.known).count();
    Ok(OpenReport {
        n_way,
        k_shot: config.k_shot,
        trials: config.open_trials,
        p_known: config.p_known,
        known,
        unknown: scores.len() - known,
        auc: curve.auc,
        curve,
    })
}

fn ksweep(test: &TestSet, config: &EvalConfig, out: &Path) -> Result<KSweepReport, PipelineError> {
    let n_way = closed_way(Protocol::Ksweep, test, config.n_way)?;
    let mut rows = Vec::with_capacity(config.k_values.len());
    for &k in &config.k_values {
        let outcomes = closed_episodes(test, n_way, k, config, 100 + k as u64)?;
        let (accuracy, mean_episode_accuracy, _) = accuracies(&outcomes);
        rows.push(KSweepRow {
            k_shot: k,
            accuracy,
            mean_episode_accuracy,
        });
    }
    let mut w =
        csv::Writer::from_path(out.join("ksweep.csv")).map_err(crate::eval::EvalError::from)?;
    for r in &rows {
        w.serialize(r).map_err(crate::eval::EvalError::from)?;
    }
    w.flush()?;
    Ok(KSweepReport {
        n_way,
        episodes: config.episodes,
        rows,
    })
}

fn positions(
    dataset: &Dataset,
    test: &TestSet,
    config: &EvalConfig,
    out: &Path,
) -> Result<PositionReport, PipelineError> {
    let n_way = closed_way(Protocol::Positions, test, config.n_way)?;
    let outcomes = closed_episodes(test, n_way, config.k_shot, config, 2)?;
    let records = &dataset.manifest.records;
    let mut results: Vec<(GridIndex, bool)> = Vec::new();
    for q in outcomes.iter().flatten() {
        let Some(cell) = records[test.positions[q.row]].grid_index else {
            return Err(PipelineError::ProtocolMismatch {
                protocol: Protocol::Positions,
                reason: format!(
                    "record {} has no grid position",
                    records[test.positions[q.row]].index
                ),
            });
        };
        results.push((cell, q.ranking[0] == q.truth));
    }
    let rows = results.iter().map(|(c, _)| c.0 + 1).max().unwrap_or(0);
    let cols = results.iter().map(|(c, _)| c.1 + 1).max().unwrap_or(0);
    let map = position_accuracy_map(&results, rows, cols);
    write_position_csv(&out.join("positions.csv"), &map)?;
    let (accuracy, _, _) = accuracies(&outcomes);
    Ok(PositionReport {
        n_way,
        k_shot: config.k_shot,
        accuracy,
        map,
    })
}

#[derive(Serialize)]
struct EstimateRow<'a> {
    index: usize,
    room: &'a str,
    target: f64,
    estimate: f64,
}

fn regress(
    dataset: &Dataset,
    model: &TrainedModel,
    test: &TestSet,
    config: &EvalConfig,
    out: &Path,
) -> Result<RegressionReport, PipelineError> {
    let norm = model
        .log
        .target_norm
        .ok_or_else(|| PipelineError::ProtocolMismatch {
            protocol: Protocol::Regress,
            reason: "model was trained without a regression target".into(),
        })?;
    let records = &dataset.manifest.records;
    let mut targets = Vec::with_capacity(test.positions.len());
    let mut estimates = Vec::with_capacity(test.positions.len());
    let mut w =
        csv::Writer::from_path(out.join("regress.csv")).map_err(crate::eval::EvalError::from)?;
    for (row, &pos) in test.positions.iter().enumerate() {
        let r = &records[pos];
        let target =
            norm.target
                .label(&r.labels)
                .ok_or_else(|| PipelineError::ProtocolMismatch {
                    protocol: Protocol::Regress,
                    reason: format!("record {} has no {:?} label", r.index, norm.target),
                })?;
        let estimate = norm.denormalize(test.regression[row]);
        w.serialize(EstimateRow {
            index: r.index,
            room: &r.room_id,
            target,
            estimate,
        })
        .map_err(crate::eval::EvalError::from)?;
        targets.push(target);
        estimates.push(estimate);
    }
    w.flush()?;
    let error = rmse(&estimates, &targets)?;
    let target_std = std_dev(&targets);
    let volume = norm.target == RegressionTarget::Volume;
    let volume_bins = if volume {
        config
            .volume_bins
            .iter()
            .map(|&n| {
                Ok((
                    n,
                    volume_bin_classify(&estimates, &targets, n, config.volume_range)?,
                ))
            })
            .collect::<Result<_, PipelineError>>()?
    } else {
        Vec::new()
    };
    Ok(RegressionReport {
        target: norm.target,
        samples: targets.len(),
        rmse: error,
        target_std,
        rmse_ratio: if target_std > 0.0 {
            error / target_std
        } else {
            f64::INFINITY
        },
        volume_range: volume.then_some(config.volume_range),
        volume_bins,
    })
}

/// Runs one protocol on the test split and writes `<protocol>.json` (plus
/// any CSV tables) to `out`.
pub fn evaluate(
    dataset: &Dataset,
    model: &TrainedModel,
    protocol: Protocol,
    config: &EvalConfig,
    out: &Path,
) -> Result<Report, PipelineError> {
    let mut reports = evaluate_all(dataset, model, &[protocol], config, out)?;
    Ok(reports.remove(0))
}

/// Like [`evaluate`] for several protocols, embedding the test split once.
pub fn evaluate_all(
    dataset: &Dataset,
    model: &TrainedModel,
    protocols: &[Protocol],
    config: &EvalConfig,
    out: &Path,
) -> Result<Vec<Report>, PipelineError> {
    if config.episodes == 0 || config.k_shot == 0 {
        return Err(PipelineError::Config(
            "episodes and k_shot must be positive".into(),
        ));
    }
    fs::create_dir_all(out)?;
    let net = model.network()?;
    let test = TestSet::build(&net, dataset)?;
    protocols
        .iter()
        .map(|&protocol| {
            let report = match protocol {
                Protocol::Closed => Report::Closed(closed(dataset, &test, config, out)?),
                Protocol::Open => Report::Open(open(&test, config)?),
                Protocol::Ksweep => Report::Ksweep(ksweep(&test, config, out)?),
                Protocol::Positions => Report::Positions(positions(dataset, &test, config, out)?),
                Protocol::Regress => Report::Regress(regress(dataset, model, &test, config, out)?),
            };
            write_summary_json(&out.join(format!("{protocol}.json")), &report)?;
            Ok(report)
        })
        .collect()
}
