use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ingest::{PoolIndex, PoolKind};
use super::manifest::{
    AirSource, Dataset, DatasetManifest, RecordLabels, SampleRecord, SpeechSource, Split,
    MANIFEST_FILE, MANIFEST_VERSION,
};
use super::PipelineError;
use crate::audio::{
    read_wav_mono, synth_speech, write_wav_f32, AudioClip, SpeechStyle, CLIP_SECONDS, WORKING_RATE,
};
use crate::degrade::{
    apply_plan, convolve_reverb, sample_degradation, CodecBridge, DegradationPlan,
    DegradationProfile,
};
use crate::features::{FeatureCache, Featurizer};
use crate::room_sim::{
    default_max_time, grid_placements, sample_room, simulate_air, Air, AirLabels, GridSpec,
    RoomSampler, RoomSpec, ShapeCategory,
};
use crate::seed::{child_rng, derive, rng_from, Stage};

/// Small rooms with short decays, cheap to render at desk scale.
pub const DESK_SAMPLER: RoomSampler = RoomSampler {
    length: (3.0, 10.0),
    height: (2.5, 4.0),
    absorption: (0.2, 0.8),
    fixed_absorption: None,
};

/// Redraws for a room whose floor cannot hold the grid.
const ROOM_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpeechPool {
    Synthetic { clips: usize },
    Index { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AirPool {
    /// Rooms cycle through the shape categories and are assigned in order:
    /// `train_rooms`, then `val_rooms`, then `test_rooms`.
    Simulated {
        train_rooms: usize,
        #[serde(default)]
        val_rooms: usize,
        test_rooms: usize,
        sampler: RoomSampler,
        grid: GridSpec,
        /// Render length; defaults to 1.5 Sabine RT60s.
        #[serde(default)]
        air_seconds: Option<f64>,
    },
    /// Ingested AIRs. In room-name order the last `test_rooms` are held out
    /// for testing and the `val_rooms` before them for validation.
    Index {
        path: PathBuf,
        #[serde(default)]
        val_rooms: usize,
        test_rooms: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub seed: u64,
    pub speech: SpeechPool,
    pub airs: AirPool,
    /// Speech clips (the last ones) whose training-room records go to validation.
    pub val_speech: usize,
    pub profile: DegradationProfile,
    /// Profile for test rooms; `profile` when absent.
    pub test_profile: Option<DegradationProfile>,
    /// Emit only test-room records. Indices and seeds are unchanged.
    pub test_only: bool,
    /// Also write every degraded clip as a float WAV under `audio/`.
    pub write_audio: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self::desk(0)
    }
}

impl GenerateConfig {
    /// 20 training rooms, 5 validation rooms and 10 test rooms on a 5 x 5
    /// grid, 8 synthetic voices, no degradation.
    pub fn desk(seed: u64) -> Self {
        Self {
            seed,
            speech: SpeechPool::Synthetic { clips: 8 },
            airs: AirPool::Simulated {
                train_rooms: 20,
                val_rooms: 5,
                test_rooms: 10,
                sampler: DESK_SAMPLER,
                grid: GridSpec::default(),
                air_seconds: None,
            },
            val_speech: 0,
            profile: DegradationProfile::clean(),
            test_profile: None,
            test_only: false,
            write_audio: false,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.profile.validate()?;
        if let Some(p) = &self.test_profile {
            p.validate()?;
        }
        if let SpeechPool::Synthetic { clips: 0 } = self.speech {
            return Err(PipelineError::MissingPool(
                "no speech clips requested".into(),
            ));
        }
        if let AirPool::Simulated {
            train_rooms,
            val_rooms,
            test_rooms,
            air_seconds,
            ..
        } = &self.airs
        {
            if train_rooms + val_rooms + test_rooms == 0 {
                return Err(PipelineError::MissingPool("no rooms requested".into()));
            }
            if air_seconds.is_some_and(|s| !(s > 0.0)) {
                return Err(PipelineError::Config("air_seconds must be positive".into()));
            }
        }
        Ok(())
    }

    fn describe(&self) -> String {
        let degraded = |p: &DegradationProfile| {
            if *p == DegradationProfile::clean() {
                "clean".to_string()
            } else {
                "degraded".to_string()
            }
        };
        let airs = match &self.airs {
            AirPool::Simulated {
                train_rooms,
                val_rooms,
                test_rooms,
                grid,
                ..
            } => format!(
                "{train_rooms} train + {val_rooms} val + {test_rooms} test simulated rooms, {}x{} grid",
                grid.rows, grid.cols
            ),
            AirPool::Index {
                path,
                val_rooms,
                test_rooms,
            } => format!(
                "AIR pool {} ({val_rooms} val rooms, {test_rooms} test rooms)",
                path.display()
            ),
        };
        let speech = match &self.speech {
            SpeechPool::Synthetic { clips } => format!("{clips} synthetic voices"),
            SpeechPool::Index { path } => format!("speech pool {}", path.display()),
        };
        let test = self.test_profile.as_ref().unwrap_or(&self.profile);
        format!(
            "{airs}; {speech}; train profile {}, test profile {}",
            degraded(&self.profile),
            degraded(test)
        )
    }
}

/// Renders one entry of the speech list at the working rate and clip length.
pub fn render_speech(source: &SpeechSource) -> Result<AudioClip, PipelineError> {
    match source {
        SpeechSource::Synthetic { seed } => {
            let mut rng = rng_from(*seed);
            let style = SpeechStyle::sample(&mut rng);
            Ok(synth_speech(&mut rng, style, WORKING_RATE, CLIP_SECONDS))
        }
        SpeechSource::File { path } => Ok(read_wav_mono(path)?
            .resampled(WORKING_RATE)
            .standardize_length()),
    }
}

fn speech_sources(pool: &SpeechPool, seed: u64) -> Result<Vec<SpeechSource>, PipelineError> {
    let out: Vec<SpeechSource> = match pool {
        SpeechPool::Synthetic { clips } => (0..*clips as u64)
            .map(|i| SpeechSource::Synthetic {
                seed: derive(seed, i, Stage::Speech),
            })
            .collect(),
        SpeechPool::Index { path } => {
            let index = PoolIndex::load(path)?;
            if index.kind != PoolKind::Speech {
                return Err(PipelineError::Config(format!(
                    "{} is not a speech pool",
                    path.display()
                )));
            }
            index
                .entries
                .iter()
                .map(|e| SpeechSource::File {
                    path: index.path(e),
                })
                .collect()
        }
    };
    if out.is_empty() {
        return Err(PipelineError::MissingPool("speech pool is empty".into()));
    }
    Ok(out)
}

fn draw_room(
    index: usize,
    sampler: &RoomSampler,
    grid: &GridSpec,
    seed: u64,
) -> Result<RoomSpec, PipelineError> {
    let shape = ShapeCategory::ALL[index % ShapeCategory::ALL.len()];
    let mut rng = child_rng(seed, index as u64, Stage::Room);
    let mut last = None;
    for _ in 0..ROOM_ATTEMPTS {
        match sample_room(format!("room{index:03}"), shape, sampler, &mut rng) {
            Ok(room) if grid.fits(&room) => return Ok(room),
            Ok(_) => {}
            Err(e) => last = Some(e),
        }
    }
    Err(match last {
        Some(e) => e.into(),
        None => PipelineError::Config(format!(
            "no {} drawn from the sampler fits the grid",
            shape.name()
        )),
    })
}

#[derive(Clone, Copy, PartialEq)]
enum RoomRole {
    Train,
    Val,
    Test,
}

impl RoomRole {
    fn of(i: usize, first_val: usize, first_test: usize) -> Self {
        if i >= first_test {
            RoomRole::Test
        } else if i >= first_val {
            RoomRole::Val
        } else {
            RoomRole::Train
        }
    }
}

/// An impulse response to be paired with every speech clip.
struct AirJob {
    class: usize,
    room_id: String,
    source: AirSource,
    role: RoomRole,
    labels: RecordLabels,
}

struct Layout {
    rooms: Vec<RoomSpec>,
    classes: Vec<String>,
    jobs: Vec<AirJob>,
}

fn simulated_layout(config: &GenerateConfig) -> Result<Layout, PipelineError> {
    let AirPool::Simulated {
        train_rooms,
        val_rooms,
        test_rooms,
        sampler,
        grid,
        ..
    } = &config.airs
    else {
        unreachable!("caller checks the pool kind");
    };
    let first_test = train_rooms + val_rooms;
    let mut rooms = Vec::new();
    let mut jobs = Vec::new();
    for i in 0..first_test + test_rooms {
        let room = draw_room(i, sampler, grid, config.seed)?;
        for p in grid_placements(&room, grid)? {
            jobs.push(AirJob {
                class: i,
                room_id: room.room_id.clone(),
                source: AirSource::Simulated {
                    room: i,
                    grid_index: p.grid_index,
                },
                role: RoomRole::of(i, *train_rooms, first_test),
                // RT60 is filled in once the response is rendered
                labels: RecordLabels {
                    volume: Some(room.volume()),
                    rt60: None,
                },
            });
        }
        rooms.push(room);
    }
    let classes = rooms.iter().map(|r| r.room_id.clone()).collect();
    Ok(Layout {
        rooms,
        classes,
        jobs,
    })
}

fn pool_layout(path: &Path, val_rooms: usize, test_rooms: usize) -> Result<Layout, PipelineError> {
    let index = PoolIndex::load(path)?;
    if index.kind != PoolKind::Air {
        return Err(PipelineError::Config(format!(
            "{} is not an AIR pool",
            path.display()
        )));
    }
    if index.entries.is_empty() {
        return Err(PipelineError::MissingPool(format!(
            "{} lists no AIRs",
            path.display()
        )));
    }
    let names: Vec<String> = index
        .entries
        .iter()
        .map(|e| e.room.clone().unwrap_or_default())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let first_test = names.len().saturating_sub(test_rooms);
    let first_val = first_test.saturating_sub(val_rooms);
    let jobs = index
        .entries
        .iter()
        .map(|e| {
            let room = e.room.clone().unwrap_or_default();
            let class = names
                .binary_search(&room)
                .expect("name taken from the entries");
            AirJob {
                class,
                room_id: room,
                source: AirSource::File {
                    path: index.path(e),
                },
                role: RoomRole::of(class, first_val, first_test),
                labels: e.labels,
            }
        })
        .collect();
    Ok(Layout {
        rooms: Vec::new(),
        classes: names,
        jobs,
    })
}

fn render_air(
    manifest_rooms: &[RoomSpec],
    source: &AirSource,
    config: &GenerateConfig,
) -> Result<Air, PipelineError> {
    match source {
        AirSource::Simulated { room, grid_index } => {
            let AirPool::Simulated {
                grid, air_seconds, ..
            } = &config.airs
            else {
                return Err(PipelineError::Config(
                    "simulated AIR in a pool-based manifest".into(),
                ));
            };
            let spec = manifest_rooms
                .get(*room)
                .ok_or_else(|| PipelineError::Config(format!("room {room} not in the manifest")))?;
            let placement = grid_placements(spec, grid)?
                .into_iter()
                .find(|p| p.grid_index == *grid_index)
                .ok_or_else(|| {
                    PipelineError::Config(format!("grid cell {grid_index:?} outside the grid"))
                })?;
            let seconds = air_seconds.unwrap_or_else(|| default_max_time(spec));
            Ok(simulate_air(spec, &placement, WORKING_RATE, seconds)?)
        }
        AirSource::File { path } => {
            let clip = read_wav_mono(path)?.resampled(WORKING_RATE);
            Ok(Air {
                sample_rate: clip.sample_rate,
                samples: clip.samples,
                room_id: String::new(),
                grid_index: (0, 0),
                labels: AirLabels {
                    volume: f64::NAN,
                    rt60_sabine: f64::NAN,
                    rt60_schroeder: f64::NAN,
                },
            })
        }
    }
}

fn degrade(
    speech: &AudioClip,
    air: &Air,
    plan: &DegradationPlan,
    bridge: Option<&CodecBridge>,
) -> Result<AudioClip, PipelineError> {
    let reverberant = convolve_reverb(speech, air)?;
    Ok(apply_plan(&reverberant, plan, bridge)?)
}

/// Rebuilds the degraded clip of one record from the manifest alone.
pub fn regenerate_clip(
    manifest: &DatasetManifest,
    index: usize,
    bridge: Option<&CodecBridge>,
) -> Result<AudioClip, PipelineError> {
    let record = manifest
        .records
        .iter()
        .find(|r| r.index == index)
        .ok_or_else(|| PipelineError::Config(format!("record {index} not in the manifest")))?;
    let air = render_air(&manifest.rooms, &record.air, &manifest.config)?;
    let speech = render_speech(&manifest.speech[record.speech])?;
    degrade(&speech, &air, &record.plan, bridge)
}

/// Builds a dataset under `out`: pairs every AIR with every speech clip,
/// degrades each pair with its own seeded plan and stores the features.
/// `jobs` worker threads share the work; the output does not depend on it.
pub fn generate_dataset(
    config: &GenerateConfig,
    out: &Path,
    bridge: Option<&CodecBridge>,
    jobs: usize,
) -> Result<Dataset, PipelineError> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let speech_list = speech_sources(&config.speech, config.seed)?;
    let speech: Vec<AudioClip> = speech_list
        .iter()
        .map(render_speech)
        .collect::<Result<_, _>>()?;
    let layout = match &config.airs {
        AirPool::Simulated { .. } => simulated_layout(config)?,
        AirPool::Index {
            path,
            val_rooms,
            test_rooms,
        } => pool_layout(path, *val_rooms, *test_rooms)?,
    };
    let n_speech = speech.len();
    let first_val = n_speech.saturating_sub(config.val_speech);
    let test_profile = config.test_profile.as_ref().unwrap_or(&config.profile);

    let dataset = Dataset::new(
        DatasetManifest {
            version: MANIFEST_VERSION,
            seed: config.seed,
            profile: config.describe(),
            config: config.clone(),
            rooms: layout.rooms,
            classes: layout.classes,
            speech: speech_list,
            records: Vec::new(),
        },
        out,
    )?;
    let audio_dir = out.join("audio");
    if config.write_audio {
        fs::create_dir_all(&audio_dir)?;
    }
    let featurizer = Featurizer::new();
    let cache: &FeatureCache = dataset.cache();
    let manifest = &dataset.manifest;

    let run_job = |(a, job): (usize, &AirJob)| -> Result<Vec<SampleRecord>, PipelineError> {
        if config.test_only && job.role != RoomRole::Test {
            return Ok(Vec::new());
        }
        let air = render_air(&manifest.rooms, &job.source, config)?;
        let mut labels = job.labels;
        if let AirSource::Simulated { .. } = job.source {
            labels.rt60 = Some(air.labels.rt60_schroeder);
        }
        let grid_index = match job.source {
            AirSource::Simulated { grid_index, .. } => Some(grid_index),
            AirSource::File { .. } => None,
        };
        let mut records = Vec::with_capacity(n_speech);
        for (s, clip) in speech.iter().enumerate() {
            let index = a * n_speech + s;
            let (split, profile) = match job.role {
                RoomRole::Test => (Split::Test, test_profile),
                RoomRole::Val => (Split::Val, &config.profile),
                RoomRole::Train if s >= first_val => (Split::Val, &config.profile),
                RoomRole::Train => (Split::Train, &config.profile),
            };
            let plan = sample_degradation(
                &mut child_rng(config.seed, index as u64, Stage::Plan),
                profile,
            )?;
            let degraded = degrade(clip, &air, &plan, bridge)?;
            let key = FeatureCache::key(&degraded);
            if cache.load(&key)?.is_none() {
                cache.store(&key, &featurizer.featurize(&degraded))?;
            }
            if config.write_audio {
                write_wav_f32(&audio_dir.join(format!("{index:06}.wav")), &degraded)?;
            }
            records.push(SampleRecord {
                index,
                class: job.class,
                room_id: job.room_id.clone(),
                grid_index,
                air: job.source.clone(),
                speech: s,
                plan,
                labels,
                split,
                feature_key: key,
            });
        }
        Ok(records)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    let per_job: Vec<Vec<SampleRecord>> = pool.install(|| {
        layout
            .jobs
            .par_iter()
            .enumerate()
            .map(run_job)
            .collect::<Result<_, _>>()
    })?;

    let mut dataset = dataset;
    dataset.manifest.records = per_job.into_iter().flatten().collect();
    if dataset.manifest.records.is_empty() {
        return Err(PipelineError::MissingPool("no records generated".into()));
    }
    dataset.manifest.save(&out.join(MANIFEST_FILE))?;
    log::info!(
        "generated {} records over {} classes in {}",
        dataset.manifest.records.len(),
        dataset.manifest.classes.len(),
        out.display()
    );
    Ok(dataset)
}

/// Rooms to render as a standalone AIR set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub seed: u64,
    pub rooms: usize,
    pub sampler: RoomSampler,
    pub grid: GridSpec,
    pub air_seconds: Option<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            rooms: 10,
            sampler: DESK_SAMPLER,
            grid: GridSpec::default(),
            air_seconds: None,
        }
    }
}

#[derive(Serialize)]
struct AirLabelRow<'a> {
    file: &'a str,
    room: &'a str,
    volume: f64,
    rt60: f64,
}

/// Renders every grid AIR of `config.rooms` sampled rooms to
/// `out/<room>_r<row>c<col>.wav`, with `labels.csv` (the format the AIR
/// ingester reads) and `rooms.json`.
pub fn simulate_rooms(
    config: &SimulateConfig,
    out: &Path,
    jobs: usize,
) -> Result<Vec<RoomSpec>, PipelineError> {
    if config.rooms == 0 {
        return Err(PipelineError::Config("rooms must be positive".into()));
    }
    if config.air_seconds.is_some_and(|s| !(s > 0.0)) {
        return Err(PipelineError::Config("air_seconds must be positive".into()));
    }
    fs::create_dir_all(out)?;
    let rooms: Vec<RoomSpec> = (0..config.rooms)
        .map(|i| draw_room(i, &config.sampler, &config.grid, config.seed))
        .collect::<Result<_, _>>()?;
    let mut jobs_list = Vec::new();
    for room in &rooms {
        for p in grid_placements(room, &config.grid)? {
            jobs_list.push((room, p));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    let rendered: Vec<(String, Air)> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|(room, p)| {
                let seconds = config.air_seconds.unwrap_or_else(|| default_max_time(room));
                let air = simulate_air(room, p, WORKING_RATE, seconds)?;
                let file = format!(
                    "{}_r{}c{}.wav",
                    room.room_id, p.grid_index.0, p.grid_index.1
                );
                write_wav_f32(
                    &out.join(&file),
                    &AudioClip::new(air.sample_rate, air.samples.clone()),
                )?;
                Ok((file, air))
            })
            .collect::<Result<_, PipelineError>>()
    })?;
    let mut w =
        csv::Writer::from_path(out.join("labels.csv")).map_err(crate::eval::EvalError::from)?;
    for (file, air) in &rendered {
        w.serialize(AirLabelRow {
            file,
            room: &air.room_id,
            volume: air.labels.volume,
            rt60: air.labels.rt60_schroeder,
        })
        .map_err(crate::eval::EvalError::from)?;
    }
    w.flush()?;
    let mut text = serde_json::to_string_pretty(&rooms)?;
    text.push('\n');
    fs::write(out.join("rooms.json"), text)?;
    Ok(rooms)
}
