use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::RecordLabels;
use super::PipelineError;
use crate::audio::{read_wav_mono, write_wav_f32, AudioClip, WORKING_RATE};

/// Index file written next to the ingested audio.
pub const INDEX_FILE: &str = "index.json";

/// Energy frame used to find quiet splice points: 20 ms at 16 kHz.
const SPLICE_FRAME: usize = 320;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Speech,
    Air,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    /// WAV file relative to the index.
    pub file: PathBuf,
    pub source: PathBuf,
    pub segment: usize,
    /// Environment the AIR belongs to; the file stem when unlabelled.
    pub room: Option<String>,
    pub labels: RecordLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolIndex {
    pub kind: PoolKind,
    pub entries: Vec<PoolEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl PoolIndex {
    /// Reads `dir/index.json`, or an index file given directly.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let file = if path.is_dir() {
            path.join(INDEX_FILE)
        } else {
            path.to_path_buf()
        };
        let mut index: Self = serde_json::from_str(&fs::read_to_string(&file)?)?;
        index.root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(index)
    }

    pub fn path(&self, entry: &PoolEntry) -> PathBuf {
        self.root.join(&entry.file)
    }
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    file: String,
    room: Option<String>,
    volume: Option<f64>,
    rt60: Option<f64>,
}

fn read_labels(path: &Path) -> Result<BTreeMap<String, LabelRow>, PipelineError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| PipelineError::UnreadableFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<LabelRow>() {
        let row = row.map_err(|e| PipelineError::UnreadableFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        out.insert(row.file.clone(), row);
    }
    Ok(out)
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(PipelineError::EmptyDirectory(dir.display().to_string()));
    }
    Ok(files)
}

/// Centre of the quietest 20 ms frame, searched on a 10 ms hop away from
/// the clip edges.
fn quietest_point(x: &[f64]) -> usize {
    if x.len() < 3 * SPLICE_FRAME {
        return x.len() / 2;
    }
    let hop = SPLICE_FRAME / 2;
    let mut best = (f64::INFINITY, x.len() / 2);
    let mut start = hop;
    while start + SPLICE_FRAME + hop <= x.len() {
        let e: f64 = x[start..start + SPLICE_FRAME].iter().map(|v| v * v).sum();
        if e < best.0 {
            best = (e, start + SPLICE_FRAME / 2);
        }
        start += hop;
    }
    best.1
}

/// Lengthens a short clip to `target` samples by splicing copies of itself
/// in at its quietest point.
pub(crate) fn extend_at_silence(x: &[f64], target: usize) -> Vec<f64> {
    if x.is_empty() {
        return vec![0.0; target];
    }
    let p = quietest_point(x);
    let mut y = x.to_vec();
    while y.len() < target {
        let mut next = Vec::with_capacity(y.len() + x.len());
        next.extend_from_slice(&x[..p]);
        next.extend_from_slice(&y);
        next.extend_from_slice(&x[p..]);
        y = next;
    }
    y.truncate(target);
    y
}

/// Splits speech into standard-length segments. A leftover tail is kept
/// (extended at a quiet point) when it is at least half a segment long, or
/// when the whole file is shorter than one segment.
pub(crate) fn segment_speech(clip: &AudioClip) -> Vec<AudioClip> {
    let n = AudioClip::standard_len(clip.sample_rate);
    let full = clip.len() / n;
    let mut out: Vec<AudioClip> = clip
        .samples
        .chunks_exact(n)
        .map(|c| AudioClip::new(clip.sample_rate, c.to_vec()))
        .collect();
    let rest = &clip.samples[full * n..];
    if !rest.is_empty() && (full == 0 || rest.len() >= n / 2) {
        out.push(AudioClip::new(clip.sample_rate, extend_at_silence(rest, n)));
    }
    out
}

/// Imports a directory of WAV files into `out`: everything is resampled to
/// the working rate and downmixed to mono, speech is cut into segments, and
/// an index is written. `labels` is an optional CSV with columns
/// `file,room,volume,rt60` attaching ground truth to AIRs.
pub fn ingest_corpus(
    dir: &Path,
    kind: PoolKind,
    out: &Path,
    labels: Option<&Path>,
) -> Result<PoolIndex, PipelineError> {
    let files = wav_files(dir)?;
    let labels = labels.map(read_labels).transpose()?.unwrap_or_default();
    fs::create_dir_all(out)?;
    let mut entries = Vec::new();
    for path in files {
        let clip = read_wav_mono(&path).map_err(|e| PipelineError::UnreadableFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let clip = clip.resampled(WORKING_RATE);
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("clip")
            .to_string();
        let name = path
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let pieces = match kind {
            PoolKind::Speech => segment_speech(&clip),
            PoolKind::Air | PoolKind::Noise => vec![clip],
        };
        let label = labels.get(&name).or_else(|| labels.get(&stem));
        for (segment, piece) in pieces.iter().enumerate() {
            let file = PathBuf::from(format!("{stem}_{segment:03}.wav"));
            write_wav_f32(&out.join(&file), piece)?;
            let (room, labels) = match kind {
                PoolKind::Air => (
                    Some(
                        label
                            .and_then(|l| l.room.clone())
                            .unwrap_or_else(|| stem.clone()),
                    ),
                    RecordLabels {
                        volume: label.and_then(|l| l.volume),
                        rt60: label.and_then(|l| l.rt60),
                    },
                ),
                _ => (None, RecordLabels::default()),
            };
            entries.push(PoolEntry {
                file,
                source: path.clone(),
                segment,
                room,
                labels,
            });
        }
    }
    let index = PoolIndex {
        kind,
        entries,
        root: out.to_path_buf(),
    };
    let mut text = serde_json::to_string_pretty(&index)?;
    text.push('\n');
    fs::write(out.join(INDEX_FILE), text)?;
    Ok(index)
}
