use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generate::GenerateConfig;
use super::PipelineError;
use crate::degrade::DegradationPlan;
use crate::features::{FeatureCache, FeatureMap};
use crate::room_sim::{GridIndex, RoomSpec};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
/// Feature store directory, relative to the manifest.
pub const FEATURES_DIR: &str = "features";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeechSource {
    /// Synthetic voice; the seed fixes both style and content.
    Synthetic {
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AirSource {
    /// Rendered from `rooms[room]` at one grid cell.
    Simulated {
        room: usize,
        grid_index: GridIndex,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordLabels {
    pub volume: Option<f64>,
    pub rt60: Option<f64>,
}

/// One generated clip: everything needed to rebuild it, plus where its
/// features live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    /// Position of `room_id` in [`DatasetManifest::classes`].
    pub class: usize,
    pub room_id: String,
    pub grid_index: Option<GridIndex>,
    pub air: AirSource,
    /// Index into [`DatasetManifest::speech`].
    pub speech: usize,
    pub plan: DegradationPlan,
    pub labels: RecordLabels,
    pub split: Split,
    pub feature_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub profile: String,
    pub config: GenerateConfig,
    pub rooms: Vec<RoomSpec>,
    pub classes: Vec<String>,
    pub speech: Vec<SpeechSource>,
    pub records: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> Result<String, PipelineError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)?;
        let manifest: Self = serde_json::from_str(&text)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(PipelineError::Config(format!(
                "manifest version {} (expected {MANIFEST_VERSION})",
                manifest.version
            )));
        }
        Ok(manifest)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Record positions of a split grouped by class, classes in id order.
    /// Classes without records in the split are left out.
    pub fn by_class(&self, split: Split) -> Vec<(usize, Vec<usize>)> {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (pos, r) in self.records.iter().enumerate() {
            if r.split == split {
                groups.entry(r.class).or_default().push(pos);
            }
        }
        groups.into_iter().collect()
    }

    /// Smallest and largest volume label in a split.
    pub fn volume_span(&self, split: Split) -> Option<(f64, f64)> {
        self.split(split)
            .filter_map(|r| r.labels.volume)
            .fold(None, |acc, v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((f64::min(lo, v), f64::max(hi, v))),
            })
    }
}

/// A manifest together with the directory it was loaded from.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
    cache: FeatureCache,
}

impl Dataset {
    pub fn new(manifest: DatasetManifest, root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        let cache = FeatureCache::open(root.join(FEATURES_DIR))?;
        Ok(Self {
            manifest,
            root,
            cache,
        })
    }

    /// Opens `dir/manifest.json`, or a manifest file given directly.
    pub fn open(path: &Path) -> Result<Self, PipelineError> {
        let (file, root) = if path.is_dir() {
            (path.join(MANIFEST_FILE), path.to_path_buf())
        } else {
            let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (path.to_path_buf(), root)
        };
        Self::new(DatasetManifest::load(&file)?, root)
    }

    pub fn cache(&self) -> &FeatureCache {
        &self.cache
    }

    pub fn features(&self, record: &SampleRecord) -> Result<FeatureMap, PipelineError> {
        self.cache
            .load(&record.feature_key)?
            .ok_or_else(|| PipelineError::MissingFeatures(record.feature_key.clone()))
    }
}
