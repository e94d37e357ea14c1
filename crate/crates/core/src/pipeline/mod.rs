//! End-to-end orchestration: dataset generation and ingestion, episodic
//! training with early stopping, evaluation protocols and reports.

mod evaluate;
mod generate;
mod ingest;
mod manifest;
mod report;
mod train;

pub use evaluate::{
    embed_records, evaluate, evaluate_all, ClosedReport, EvalConfig, KSweepReport, KSweepRow,
    OpenReport, PositionReport, Protocol, RegressionReport, Report,
};
pub use generate::{
    generate_dataset, regenerate_clip, render_speech, simulate_rooms, AirPool, GenerateConfig,
    SimulateConfig, SpeechPool, DESK_SAMPLER,
};
pub use ingest::{ingest_corpus, PoolEntry, PoolIndex, PoolKind, INDEX_FILE};
pub use manifest::{
    AirSource, Dataset, DatasetManifest, RecordLabels, SampleRecord, SpeechSource, Split,
    FEATURES_DIR, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use report::summarize_reports;
pub use train::{
    train, EpochLog, RegressionTarget, TargetNorm, TrainConfig, TrainLog, TrainedModel,
    CHECKPOINT_FILE, LOG_FILE,
};

use std::io;

use thiserror::Error;

use crate::audio::WavError;
use crate::degrade::DegradeError;
use crate::eval::EvalError;
use crate::fewshot::FewShotError;
use crate::model::ModelError;
use crate::room_sim::RoomError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing pool: {0}")]
    MissingPool(String),
    #[error("split {0:?} has no records")]
    MissingSplit(Split),
    #[error("protocol {protocol:?}: {reason}")]
    ProtocolMismatch { protocol: Protocol, reason: String },
    #[error("unreadable file {path}: {reason}")]
    UnreadableFile { path: String, reason: String },
    #[error("no audio files in {0}")]
    EmptyDirectory(String),
    #[error("feature record {0} missing from the store")]
    MissingFeatures(String),
    #[error(transparent)]
    Degrade(#[from] DegradeError),
    #[error(transparent)]
    Room(#[from] RoomError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    FewShot(#[from] FewShotError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl PipelineError {
    /// Process exit code: 2 for configuration problems, 3 when an external
    /// codec tool is missing, 4 for everything data related.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Model(ModelError::InvalidConfig(_)) => 2,
            Self::Degrade(DegradeError::CodecUnavailable(_)) => 3,
            Self::Degrade(
                DegradeError::InvalidStep(_)
                | DegradeError::ChainTooLong(_)
                | DegradeError::EmptyProfile(_),
            ) => 2,
            Self::FewShot(FewShotError::Model(ModelError::InvalidConfig(_))) => 2,
            _ => 4,
        }
    }
}
