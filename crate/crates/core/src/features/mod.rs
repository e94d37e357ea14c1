//! 96 x 276 log-Mel + MFCC input maps.

mod cache;
pub mod mel;
pub mod mfcc;
pub mod stft;

pub use cache::FeatureCache;
pub use mel::{log_mel, mel_spectrogram, MelFilterbank};
pub use mfcc::mfcc;
pub use stft::{power, stft};

use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, WORKING_RATE};

pub const FRAMES: usize = 96;
pub const N_MELS: usize = 256;
pub const N_MFCC: usize = 20;
pub const FEATURE_BINS: usize = N_MELS + N_MFCC;
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

/// A standardized frames x bins feature matrix, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub values: Vec<f32>,
    pub normalization: Option<Normalization>,
}

impl FeatureMap {
    pub fn shape(&self) -> (usize, usize) {
        (FRAMES, FEATURE_BINS)
    }

    pub fn get(&self, frame: usize, bin: usize) -> f32 {
        self.values[frame * FEATURE_BINS + bin]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn zeros() -> Self {
        Self {
            values: vec![0.0; FRAMES * FEATURE_BINS],
            normalization: None,
        }
    }
}

/// Reusable front-end holding the Mel filterbank.
#[derive(Debug, Clone)]
pub struct Featurizer {
    bank: MelFilterbank,
}

impl Default for Featurizer {
    fn default() -> Self {
        Self::new()
    }
}

impl Featurizer {
    pub fn new() -> Self {
        Self {
            bank: MelFilterbank::new(N_MELS, stft::WINDOW, WORKING_RATE),
        }
    }

    pub fn bank(&self) -> &MelFilterbank {
        &self.bank
    }

    /// Computes the standardized `[log-Mel | MFCC]` map of a clip.
    ///
    /// The clip is resampled to the working rate, forced to 3 s and scaled
    /// to unit RMS first, so near-silent stretches sitting on the log floor
    /// do not make the map depend on the input gain. The log-Mel block is
    /// centred on its own mean before the MFCCs are taken and missing frames
    /// are filled with the block minimum.
    pub fn featurize(&self, clip: &AudioClip) -> FeatureMap {
        let mut clip = clip.resampled(WORKING_RATE).standardize_length();
        let level = clip.rms();
        if level > 0.0 {
            clip.samples.iter_mut().for_each(|v| *v /= level);
        }
        let mut mel = log_mel(&power(&stft(&clip.samples)), &self.bank);
        mel.truncate(FRAMES);

        let count = (mel.len() * N_MELS) as f64;
        let centre = mel.iter().flatten().sum::<f64>() / count;
        let mut min = f64::INFINITY;
        for v in mel.iter_mut().flatten() {
            *v -= centre;
            min = min.min(*v);
        }
        mel.resize(FRAMES, vec![min; N_MELS]);
        let ceps = mfcc(&mel, N_MFCC);

        let mut raw = Vec::with_capacity(FRAMES * FEATURE_BINS);
        for (m, c) in mel.iter().zip(&ceps) {
            raw.extend_from_slice(m);
            raw.extend_from_slice(c);
        }
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        // a constant map only carries rounding residue around its mean
        let values = if std < STD_FLOOR {
            vec![0.0; raw.len()]
        } else {
            raw.iter().map(|v| ((v - mean) / std) as f32).collect()
        };
        FeatureMap {
            values,
            normalization: Some(Normalization { mean, std }),
        }
    }
}

/// Convenience wrapper building a fresh [`Featurizer`].
pub fn featurize(clip: &AudioClip) -> FeatureMap {
    Featurizer::new().featurize(clip)
}
