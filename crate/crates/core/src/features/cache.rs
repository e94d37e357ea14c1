use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{FeatureMap, FEATURE_BINS, FRAMES};
use crate::audio::AudioClip;

/// Bumped whenever the front-end output changes, so stale stores miss.
const FRONT_END_VERSION: u32 = 2;

/// On-disk feature store: one `<sha256>.f32` file per clip holding the
/// 96 x 276 matrix as little-endian f32, keyed by the clip's content.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Content hash over the front-end version, the sample rate and the f32
    /// samples.
    pub fn key(clip: &AudioClip) -> String {
        let mut h = Sha256::new();
        h.update(FRONT_END_VERSION.to_le_bytes());
        h.update(clip.sample_rate.to_le_bytes());
        for &s in &clip.samples {
            h.update((s as f32).to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.f32"))
    }

    pub fn load(&self, key: &str) -> io::Result<Option<FeatureMap>> {
        let bytes = match fs::read(self.path(key)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        if bytes.len() != FRAMES * FEATURE_BINS * 4 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("feature record {key} has {} bytes", bytes.len()),
            ));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Some(FeatureMap {
            values,
            normalization: None,
        }))
    }

    pub fn store(&self, key: &str, map: &FeatureMap) -> io::Result<()> {
        let mut bytes = Vec::with_capacity(map.values.len() * 4);
        for v in &map.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        // written aside and renamed so a concurrent reader never sees a partial record
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&bytes)?;
        tmp.persist(self.path(key)).map_err(|e| e.error)?;
        Ok(())
    }
}
